#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "qbm/data.hpp"
#include "qbm/error.hpp"
#include "qbm/experiments.hpp"

using namespace qbm;
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(const std::vector<Image>& images, std::size_t rows, std::size_t cols) {
  std::vector<std::uint8_t> out;
  put_u32(out, 0x803);
  put_u32(out, static_cast<std::uint32_t>(images.size()));
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  for (const auto& im : images) out.insert(out.end(), im.pixels.begin(), im.pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_u32(out, 0x801);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

Image constant_image(std::size_t n, std::uint8_t v) { return Image{n, n, std::vector<std::uint8_t>(n * n, v)}; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.seed = 3;
  c.restarts = 2;
  c.instances = 3;
  c.data.count = 40;
  c.trainer.min_epochs = 30;
  c.trainer.window = 10;
  c.trainer.max_epochs = 60;
  c.kappa_points = 5;
  c.kappa_hi = 10.0;
  c.noise_levels = {0.05, 0.1};
  c.hidden_units = {1, 2};
  c.unit_counts = {4, 6};
  c.model = {6, 2, Topology::drbm, {1, 1}, 0.1325, 1.0};
  return c;
}

}  // namespace

TEST_CASE("synthetic base patterns") {
  const auto p = base_patterns(6);
  CHECK(p[0] == VisibleVector{1, 1, 1, 0, 0, 0});
  CHECK(p[1] == VisibleVector{1, 0, 1, 0, 1, 0});
  CHECK(p[2] == VisibleVector{0, 0, 0, 1, 1, 1});
  CHECK(p[3] == VisibleVector{0, 1, 0, 1, 0, 1});
  CHECK(base_patterns(5)[0] == VisibleVector{1, 1, 1, 0, 0});

  const auto d = gen_synthetic(6, 0.0, 1000, 1);
  std::map<VisibleVector, std::size_t> freq;
  for (std::size_t r = 0; r < d.size(); ++r) ++freq[d.bits(r)];
  CHECK(freq.size() == 4);
  for (const auto& pat : p) CHECK(freq[pat] == 250);
}

TEST_CASE("synthetic noise") {
  const std::size_t n = 20000;
  const auto d = gen_synthetic(6, 0.5, n, 4);
  const double se = std::sqrt(0.25 / double(n));
  for (std::size_t i = 0; i < 6; ++i) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += d.row(r)[i];
    CHECK(std::abs(m / double(n) - 0.5) <= 3.0 * se);
  }
  const auto a = gen_synthetic(6, 0.1, 100, 9);
  const auto b = gen_synthetic(6, 0.1, 100, 9);
  for (std::size_t r = 0; r < 100; ++r) CHECK(a.row(r) == b.row(r));
  CHECK_THROWS_AS(gen_synthetic(6, 0.6, 10, 1), DomainError);
  CHECK_THROWS_AS(gen_synthetic(1, 0.1, 10, 1), DomainError);
}

TEST_CASE("IDX parsing") {
  Image a{2, 3, {0, 1, 2, 3, 4, 5}};
  Image b{2, 3, {9, 8, 7, 6, 5, 4}};
  const auto bytes = idx_images({a, b}, 2, 3);
  const auto imgs = parse_idx_images(bytes);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].rows == 2);
  CHECK(imgs[0].cols == 3);
  CHECK(imgs[1].pixels == b.pixels);
  CHECK(imgs[0].at(1, 2) == 5);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_idx_images(truncated), SchemaError);
  auto bad_magic = bytes;
  bad_magic[3] = 0x01;
  CHECK_THROWS_AS(parse_idx_images(bad_magic), SchemaError);
  const std::vector<std::uint8_t> short_header{0, 0, 8};
  CHECK_THROWS_AS(parse_idx_images(short_header), SchemaError);

  const auto labels = parse_idx_labels(idx_labels({1, 7}));
  CHECK(labels == std::vector<std::uint8_t>{1, 7});
  auto lt = idx_labels({1, 7});
  lt.pop_back();
  CHECK_THROWS_AS(parse_idx_labels(lt), SchemaError);
  CHECK_THROWS_AS(parse_idx_labels(bytes), SchemaError);

  const fs::path dir = fs::temp_directory_path() / "qbm_idx_test";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "img.idx", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK(load_idx_images((dir / "img.idx").string()).size() == 2);
  CHECK_THROWS_AS(load_idx_images((dir / "missing.idx").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("coarse graining") {
  CHECK(coarse_grain(constant_image(28, 77), 3) == VisibleVector(9, 1));

  Image half{28, 28, std::vector<std::uint8_t>(28 * 28, 0)};
  for (std::size_t r = 0; r < 28; ++r)
    for (std::size_t c = 0; c < 14; ++c) half.pixels[r * 28 + c] = 255;
  // Blocks are 10/9/9 wide; the middle block is 4/9 bright: 113.3 < mean 122.8.
  CHECK(coarse_grain(half, 3) == VisibleVector{1, 0, 0, 1, 0, 0, 1, 0, 0});

  Image left{28, 28, std::vector<std::uint8_t>(28 * 28, 0)};
  for (std::size_t r = 0; r < 28; ++r)
    for (std::size_t c = 0; c < 10; ++c) left.pixels[r * 28 + c] = 200;
  CHECK(coarse_grain(left, 3) == VisibleVector{1, 0, 0, 1, 0, 0, 1, 0, 0});

  // Block boundaries: row 9 belongs to the first block, row 10 to the second.
  Image row{28, 28, std::vector<std::uint8_t>(28 * 28, 0)};
  for (std::size_t c = 0; c < 28; ++c) row.pixels[9 * 28 + c] = 250;
  CHECK(coarse_grain(row, 3) == VisibleVector{1, 1, 1, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("digit subsampling") {
  std::vector<Image> imgs;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 10; ++i) {
    imgs.push_back(constant_image(6, static_cast<std::uint8_t>(i)));
    labels.push_back(static_cast<std::uint8_t>(i % 3));
  }
  const auto d = subsample_digits(imgs, labels, 1, 3, 3);
  CHECK(d.size() == 3);
  CHECK(d.n_visible() == 9);
  CHECK_THROWS_AS(subsample_digits(imgs, labels, 1, 3, 4), DomainError);
  labels.pop_back();
  CHECK_THROWS_AS(subsample_digits(imgs, labels, 1, 3, 1), DimensionError);
}

TEST_CASE("dataset csv") {
  const auto d = gen_synthetic(4, 0.0, 4, 1);
  std::ostringstream out;
  write_dataset_csv(out, d, {{"seed", "1"}});
  CHECK(out.str() == "# seed=1\nx0,x1,x2,x3,weight\n1,1,0,0,1\n1,0,1,0,1\n0,0,1,1,1\n0,1,0,1,1\n");
}

TEST_CASE("config parsing") {
  const auto c = ExperimentConfig::from_json(R"({"protocol": "kappa-scan", "seed": 9, "instances": 5,
      "model": {"n_v": 4, "n_h": 4, "topology": "rbm"}, "trainer": {"learning_rate": 0.02}})");
  CHECK(c.protocol == Protocol::kappa_scan);
  CHECK(c.seed == 9);
  CHECK(c.instances == 5);
  CHECK(c.model.topology == Topology::rbm);
  CHECK(c.trainer.learning_rate == 0.02);
  CHECK(c.trainer.min_epochs == 10000);

  const auto round = ExperimentConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());

  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"unknown": 1})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"seed": "abc"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"protocol": "nope"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"trainer": {"learning_rate": -1}})").validate(), ConfigError);
  for (auto p : {Protocol::cd_ml, Protocol::ml_cd, Protocol::ml_ml, Protocol::kappa_scan, Protocol::noise_scan,
                 Protocol::full_bm, Protocol::hedge_scan, Protocol::resources})
    CHECK(parse_protocol(to_string(p)) == p);
}

TEST_CASE("statistics helpers") {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.n == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(summarize({7.0}).sd == 0.0);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(percentile({1.0, 2.0, 3.0}, 0.0) == 1.0);
  CHECK(percentile({1.0, 2.0, 3.0}, 1.0) == 3.0);
  const std::vector<double> x{0.1, 0.2, 0.5, 1.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 2.0));
  const auto fit = fit_power_law(x, y);
  CHECK(fit.a == doctest::Approx(3.0));
  CHECK(fit.b == doctest::Approx(2.0));
}

TEST_CASE("compare protocol") {
  auto c = tiny_config();
  const auto data = make_dataset(c.data, 1);
  const auto r = run_compare(c, data);
  CHECK(r.rows.size() == 2);
  CHECK(r.first.n == 2);
  for (const auto& row : r.rows) {
    CHECK(std::isfinite(row.first_objective));
    // Exact-gradient ML refinement cannot end below its starting point.
    CHECK(row.second_objective >= row.first_objective - 1e-9);
    CHECK(row.improvement_pct == doctest::Approx(100.0 * (row.second_objective - row.first_objective) /
                                                 std::abs(row.first_objective)));
  }
}

TEST_CASE("kappa scan bands") {
  auto c = tiny_config();
  c.model = {4, 4, Topology::rbm, {}, 0.1325, 1.0};
  const auto r = run_kappa_scan(c);
  CHECK(r.rows.size() == c.instances * c.sigmas.size());
  for (const auto& p : r.curve) {
    CHECK(p.lo <= p.mean + 1e-12);
    CHECK(p.mean <= p.hi + 1e-12);
    CHECK(p.n == c.instances);
  }
  for (const auto& row : r.rows) CHECK(row.log_Z_Q <= row.log_Z + 1e-12);
}

TEST_CASE("experiments are reproducible and carry their configuration") {
  auto c = tiny_config();
  const fs::path a = fs::temp_directory_path() / "qbm_exp_a";
  const fs::path b = fs::temp_directory_path() / "qbm_exp_b";
  fs::remove_all(a);
  fs::remove_all(b);
  for (auto p : {Protocol::cd_ml, Protocol::kappa_scan, Protocol::resources, Protocol::noise_scan,
                 Protocol::full_bm}) {
    c.protocol = p;
    if (p == Protocol::noise_scan) c.model = {6, 2, Topology::rbm, {}, 0.1325, 1.0};
    const auto pa = run_experiment(c, a);
    const auto pb = run_experiment(c, b);
    REQUIRE(pa.size() == pb.size());
    REQUIRE_FALSE(pa.empty());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const std::string text = slurp(pa[i]);
      CHECK(text == slurp(pb[i]));
      CHECK(text.find("# protocol=" + std::string(to_string(p))) != std::string::npos);
      CHECK(text.find("# seed=3") != std::string::npos);
      const auto cfg_pos = text.find("# config=");
      REQUIRE(cfg_pos != std::string::npos);
      const auto line = text.substr(cfg_pos + 9, text.find('\n', cfg_pos) - cfg_pos - 9);
      CHECK(nlohmann::json::parse(line)["seed"] == 3);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}
