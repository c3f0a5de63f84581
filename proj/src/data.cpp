#include "qbm/data.hpp"

#include <fstream>
#include <iterator>
#include <ostream>

#include "qbm/error.hpp"
#include "qbm/random.hpp"

namespace qbm {

std::vector<VisibleVector> base_patterns(std::size_t n_v) {
  VisibleVector x1(n_v), x2(n_v);
  for (std::size_t j = 1; j <= n_v; ++j) {
    x1[j - 1] = 2 * j <= n_v + 1 ? 1 : 0;
    x2[j - 1] = static_cast<std::uint8_t>(j % 2);
  }
  VisibleVector n1(n_v), n2(n_v);
  for (std::size_t i = 0; i < n_v; ++i) {
    n1[i] = 1 - x1[i];
    n2[i] = 1 - x2[i];
  }
  return {x1, x2, n1, n2};
}

Dataset gen_synthetic(std::size_t n_v, double noise, std::size_t count, std::uint64_t seed) {
  if (n_v < 2) throw DomainError("synthetic data needs at least two visible units");
  if (!(noise >= 0.0 && noise <= 0.5)) throw DomainError("bit-flip noise must lie in [0, 0.5]");
  const auto patterns = base_patterns(n_v);
  Rng rng(seed);
  Dataset data(n_v);
  for (std::size_t k = 0; k < count; ++k) {
    VisibleVector x = patterns[k % patterns.size()];
    if (noise > 0.0)
      for (auto& bit : x)
        if (uniform01(rng) < noise) bit = 1 - bit;
    data.add_bits(x);
  }
  return data;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw SchemaError("IDX header is truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (read_be32(bytes, 0) != 0x00000803U) throw SchemaError("bad IDX image magic number");
  const std::size_t n = read_be32(bytes, 4), rows = read_be32(bytes, 8), cols = read_be32(bytes, 12);
  const std::size_t size = rows * cols;
  if (bytes.size() < 16 + n * size) throw SchemaError("IDX image data is truncated");
  std::vector<Image> images(n);
  for (std::size_t k = 0; k < n; ++k) {
    images[k].rows = rows;
    images[k].cols = cols;
    const auto* begin = bytes.data() + 16 + k * size;
    images[k].pixels.assign(begin, begin + size);
  }
  return images;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (read_be32(bytes, 0) != 0x00000801U) throw SchemaError("bad IDX label magic number");
  const std::size_t n = read_be32(bytes, 4);
  if (bytes.size() < 8 + n) throw SchemaError("IDX label data is truncated");
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n)};
}

std::vector<Image> load_idx_images(const std::string& path) { return parse_idx_images(read_file(path)); }

std::vector<std::uint8_t> load_idx_labels(const std::string& path) { return parse_idx_labels(read_file(path)); }

namespace {

// Boundaries of `parts` near-equal segments of [0, n); earlier segments are larger.
std::vector<std::size_t> split(std::size_t n, std::size_t parts) {
  std::vector<std::size_t> edges{0};
  for (std::size_t p = 0; p < parts; ++p) edges.push_back(edges.back() + n / parts + (p < n % parts ? 1 : 0));
  return edges;
}

}  // namespace

VisibleVector coarse_grain(const Image& image, std::size_t grid) {
  if (grid == 0 || image.rows < grid || image.cols < grid) throw DomainError("grid does not fit the image");
  const auto re = split(image.rows, grid), ce = split(image.cols, grid);
  std::vector<double> block(grid * grid);
  double mean = 0.0;
  for (std::size_t br = 0; br < grid; ++br)
    for (std::size_t bc = 0; bc < grid; ++bc) {
      double s = 0.0;
      for (std::size_t r = re[br]; r < re[br + 1]; ++r)
        for (std::size_t c = ce[bc]; c < ce[bc + 1]; ++c) s += image.at(r, c);
      const double avg = s / static_cast<double>((re[br + 1] - re[br]) * (ce[bc + 1] - ce[bc]));
      block[br * grid + bc] = avg;
      mean += avg;
    }
  mean /= static_cast<double>(grid * grid);
  VisibleVector out(grid * grid);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = block[k] >= mean ? 1 : 0;
  return out;
}

Dataset subsample_digits(const std::vector<Image>& images, const std::vector<std::uint8_t>& labels, int digit,
                         std::size_t grid, std::size_t count) {
  if (images.size() != labels.size()) throw DimensionError("image and label archives differ in length");
  Dataset data(grid * grid);
  for (std::size_t k = 0; k < images.size() && data.size() < count; ++k)
    if (labels[k] == digit) data.add_bits(coarse_grain(images[k], grid));
  if (data.size() < count) throw DomainError("not enough images with the requested label");
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const std::map<std::string, std::string>& metadata) {
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < data.n_visible(); ++i) out << 'x' << i << ',';
  out << "weight\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double x : data.row(r)) out << x << ',';
    out << data.weight(r) << '\n';
  }
}

}  // namespace qbm
