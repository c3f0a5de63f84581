#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qbm/dataset.hpp"
#include "qbm/gibbs.hpp"

namespace qbm {

/// The four base patterns: x1 (first ceil(n_v / 2) bits set), x2 (bits at odd
/// 1-based positions set) and their negations, in that order: x1, x2, ~x1, ~x2.
std::vector<VisibleVector> base_patterns(std::size_t n_v);

/// `count` vectors cycling through the base patterns, each bit flipped
/// independently with probability `noise`. Throws DomainError unless
/// n_v >= 2 and noise lies in [0, 0.5].
Dataset gen_synthetic(std::size_t n_v, double noise, std::size_t count, std::uint64_t seed);

/// Row-major 8-bit grayscale image.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
};

/// IDX image archive (magic 0x00000803, big-endian header). Throws SchemaError
/// for a bad magic number or truncated content.
std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes);
/// IDX label archive (magic 0x00000801).
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<Image> load_idx_images(const std::string& path);
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

/// Splits the image into grid x grid near-equal blocks (larger blocks first),
/// averages each block and thresholds against the mean of the block averages
/// (value >= mean gives 1). Output is row-major over blocks.
VisibleVector coarse_grain(const Image& image, std::size_t grid);

/// First `count` images labelled `digit`, coarse-grained. Throws DimensionError
/// when the archives disagree in length and DomainError when fewer than
/// `count` images match.
Dataset subsample_digits(const std::vector<Image>& images, const std::vector<std::uint8_t>& labels, int digit = 1,
                         std::size_t grid = 3, std::size_t count = 400);

/// One row per vector with columns x0..x{n-1},weight.
void write_dataset_csv(std::ostream& out, const Dataset& data, const std::map<std::string, std::string>& metadata);

}  // namespace qbm
