#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "udil/data.hpp"
#include "udil/errors.hpp"

using namespace udil;

namespace {

LabeledSet tiny_images(int n, int side, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSet s;
  s.num_classes = 3;
  s.inputs.resize(n, side * side);
  for (Index i = 0; i < s.inputs.size(); ++i) s.inputs.data()[i] = u(rng);
  for (int i = 0; i < n; ++i) s.labels.push_back(i % 3);
  return s;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("udil_test_" + name);
}

}  // namespace

TEST_CASE("hd_balls labeling rule along the normal") {
  const RowVector mu = RowVector{{0.6, 0.8}};
  CHECK(hd_balls_label(1.2 * mu, mu) == 1);
  CHECK(hd_balls_label(0.8 * mu, mu) == 0);
  CHECK(hd_balls_label(mu, mu) == 0);
}

TEST_CASE("hd_balls shapes, split and determinism") {
  const DomainStream s = gen_hd_balls(3, 4, 100, 10, 0.2);
  CHECK(s.size() == 4);
  CHECK(s.input_dim == 10);
  CHECK(s.num_classes == 2);
  for (int t = 0; t < 4; ++t) {
    const auto& d = s.domains[static_cast<std::size_t>(t)];
    CHECK(d.train.size() == 80);
    CHECK(d.test.size() == 20);
    CHECK(d.train.domain_id == t + 1);
    CHECK(d.test.domain_id == t + 1);
  }
  CHECK(gen_hd_balls(3, 4, 100, 10, 0.2).fingerprint() == s.fingerprint());
  CHECK(gen_hd_balls(4, 4, 100, 10, 0.2).fingerprint() != s.fingerprint());
  // Domains come from per-domain substreams: a longer stream shares its prefix.
  const DomainStream longer = gen_hd_balls(3, 6, 100, 10, 0.2);
  CHECK(longer.domains[1].train.inputs == s.domains[1].train.inputs);
}

TEST_CASE("hd_balls class balance and geometry with 2000 points per domain in 100 dimensions") {
  const DomainStream s = gen_hd_balls(0, 3, 2000, 100, 0.2);
  for (const auto& d : s.domains) {
    std::vector<int> all = d.train.labels;
    all.insert(all.end(), d.test.labels.begin(), d.test.labels.end());
    const double ones = static_cast<double>(std::count(all.begin(), all.end(), 1)) / static_cast<double>(all.size());
    CHECK(std::abs(ones - 0.5) <= 0.05);
    // The sample mean estimates mu, which lies on the unit sphere.
    const RowVector mean = d.train.inputs.colwise().mean();
    CHECK(std::abs(mean.norm() - 1.0) < 0.1);
    // Every label must agree with the rule under the estimated mean for
    // points far from the boundary.
    const RowVector mu = mean / mean.norm();
    for (Index i = 0; i < d.train.inputs.rows(); ++i) {
      const double margin = d.train.inputs.row(i).dot(mu) - 1.0;
      if (std::abs(margin) > 0.1) CHECK(d.train.labels[static_cast<std::size_t>(i)] == (margin > 0 ? 1 : 0));
    }
  }
}

TEST_CASE("hd_balls rejects degenerate configurations") {
  CHECK_THROWS_AS(gen_hd_balls(0, 2, 4, 10, 0.2), ConfigError);
  CHECK_THROWS_AS(gen_hd_balls(0, 2, 100, 1, 0.2), ConfigError);
  CHECK_THROWS_AS(gen_hd_balls(0, 2, 100, 10, 0.0), ConfigError);
}

TEST_CASE("permutation helpers") {
  const Matrix m{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  const std::vector<std::size_t> id{0, 1, 2};
  CHECK(permute_columns(m, id) == m);
  const std::vector<std::size_t> p{2, 0, 1};
  CHECK(permute_columns(m, p) == Matrix{{3.0, 1.0, 2.0}, {6.0, 4.0, 5.0}});
  CHECK(permute_columns(permute_columns(m, p), inverse_permutation(p)) == m);
}

TEST_CASE("permuted stream applies one permutation per domain to both splits") {
  const LabeledSet train = tiny_images(30, 4, 1);
  const LabeledSet test = tiny_images(12, 4, 2);
  const DomainStream s = permuted_stream(train, test, 3, 99);
  for (const auto& d : s.domains) {
    // Recover the permutation from row 0 of train (values are distinct a.s.)
    std::vector<std::size_t> perm(16);
    for (Index j = 0; j < 16; ++j) {
      for (Index k = 0; k < 16; ++k) {
        if (d.train.inputs(0, j) == train.inputs(0, k)) perm[static_cast<std::size_t>(j)] = static_cast<std::size_t>(k);
      }
    }
    CHECK(d.train.inputs == permute_columns(train.inputs, perm));
    CHECK(d.test.inputs == permute_columns(test.inputs, perm));
    CHECK(d.train.labels == train.labels);
  }
  CHECK(s.domains[0].train.inputs != s.domains[1].train.inputs);
  const DomainStream sub = permuted_stream(train, test, 2, 99, 10, 5);
  CHECK(sub.domains[1].train.size() == 10);
  CHECK(sub.domains[1].test.size() == 5);
}

TEST_CASE("rotation basics") {
  CHECK(rotation_range(1) == std::pair<double, double>{0.0, 9.0});
  CHECK(rotation_range(3) == std::pair<double, double>{18.0, 27.0});
  const LabeledSet base = tiny_images(1, 5, 3);
  const std::vector<double> img(base.inputs.data(), base.inputs.data() + 25);
  CHECK(rotate_image(img, 0.0) == img);
  CHECK_THROWS_AS(rotate_image(std::vector<double>(10, 0.0), 5.0), ConfigError);
}

TEST_CASE("rotation by 90 degrees permutes pixels exactly") {
  std::vector<double> img(9);
  for (int i = 0; i < 9; ++i) img[static_cast<std::size_t>(i)] = i + 1.0;
  const auto r = rotate_image(img, 90.0);
  // Counter-clockwise on screen: the top row becomes the left column, read upwards.
  const std::vector<double> expect{3, 6, 9, 2, 5, 8, 1, 4, 7};
  for (std::size_t i = 0; i < 9; ++i) CHECK(r[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("rotation conserves the mass of a centred smooth disk") {
  // Bilinear resampling only conserves mass up to the curvature of the
  // image, so the disk is drawn large and smooth (cos^2 profile, radius 50).
  const int side = 112;
  const double radius = 50.0;
  std::vector<double> img(static_cast<std::size_t>(side * side));
  const double c = 0.5 * (side - 1);
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const double d = std::hypot(r - c, col - c);
      const double v = d < radius ? std::cos(std::numbers::pi * d / (2.0 * radius)) : 0.0;
      img[static_cast<std::size_t>(r * side + col)] = v * v;
    }
  }
  double mass = 0.0;
  for (double v : img) mass += v;
  for (double angle = 0.5; angle < 90.0; angle += 0.5) {
    double rotated = 0.0;
    for (double v : rotate_image(img, angle)) rotated += v;
    CHECK(std::abs(rotated - mass) / mass <= 1e-6);
  }
}

TEST_CASE("rotated stream angles stay within the domain range") {
  // A single bright pixel off-centre reveals the rotation angle.
  LabeledSet base;
  base.num_classes = 2;
  const int side = 41;
  base.inputs = Matrix::Zero(40, side * side);
  for (int i = 0; i < 40; ++i) {
    base.inputs(i, 20 * side + 38) = 1.0;
    base.labels.push_back(i % 2);
  }
  const DomainStream s = rotated_stream(base, base, 3, 5);
  for (int t = 1; t <= 3; ++t) {
    const auto [lo, hi] = rotation_range(t);
    const auto& set = s.domains[static_cast<std::size_t>(t - 1)].train;
    for (Index i = 0; i < set.inputs.rows(); ++i) {
      double wx = 0.0, wy = 0.0, w = 0.0;
      for (int r = 0; r < side; ++r) {
        for (int col = 0; col < side; ++col) {
          const double v = set.inputs(i, r * side + col);
          wx += v * (col - 20.0);
          wy += v * (20.0 - r);
          w += v;
        }
      }
      const double deg = std::atan2(wy / w, wx / w) * 180.0 / std::numbers::pi;
      CHECK(deg >= lo - 0.5);
      CHECK(deg < hi + 0.5);
    }
  }
}

TEST_CASE("binary stream round-trip is bitwise exact") {
  const DomainStream s = gen_hd_balls(8, 3, 50, 6, 0.3);
  const auto path = temp_path("stream.bin");
  write_stream(s, path);
  const DomainStream back = read_stream(path);
  CHECK(back.fingerprint() == s.fingerprint());
  CHECK(back.domains[2].test.inputs == s.domains[2].test.inputs);
  CHECK(back.domains[1].train.labels == s.domains[1].train.labels);
  const auto path2 = temp_path("stream2.bin");
  write_stream(back, path2);
  CHECK(std::filesystem::file_size(path) == std::filesystem::file_size(path2));

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_stream(path), FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("labeled set validation") {
  LabeledSet s;
  s.num_classes = 2;
  s.inputs = Matrix::Zero(2, 3);
  s.labels = {0, 1};
  CHECK_NOTHROW(s.validate());
  s.labels = {0, 2};
  CHECK_THROWS_AS(s.validate(), IngestionError);
  s.labels = {0};
  CHECK_THROWS_AS(s.validate(), IngestionError);
}
