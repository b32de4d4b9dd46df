#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rework/data.hpp"
#include "rework/errors.hpp"
#include "rework/pca.hpp"
#include "rework/simulate.hpp"
#include "support.hpp"

using namespace rework;

TEST_CASE("load_dataset parses a small csv") {
  testing::TempDir dir("csv");
  testing::write_file(dir.file("d.csv"), "y,a,x1,x2\n1.5,1,0.1,0.2\n2,0,0.3,0.4\n-1,0,0.5,0.6\n0,1,0.7,0.8\n");
  const LotDataset d = load_dataset(dir.file("d.csv"), CsvSchema{});
  CHECK(d.n() == 4);
  CHECK(d.d() == 2);
  CHECK(d.y[0] == 1.5);
  CHECK(d.a[3] == 1.0);
  CHECK(d.x(2, 1) == 0.6);
  CHECK(d.lot_id[2] == "2");
}

TEST_CASE("load_dataset reports the row of a non-binary treatment") {
  testing::TempDir dir("csv");
  testing::write_file(dir.file("d.csv"), "y,a,x1,x2\n1,1,0,0\n1,0,0,0\n1,2,0,0\n");
  try {
    load_dataset(dir.file("d.csv"), CsvSchema{});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.row() == 2);
  }
}

TEST_CASE("load_dataset names a missing column") {
  testing::TempDir dir("csv");
  testing::write_file(dir.file("d.csv"), "y,a,x1\n1,1,0\n1,0,0\n");
  try {
    load_dataset(dir.file("d.csv"), CsvSchema{});
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.column() == "x2");
  }
}

TEST_CASE("load_dataset rejects non-finite values and missing files") {
  testing::TempDir dir("csv");
  testing::write_file(dir.file("d.csv"), "y,a,x1,x2\n1,1,0,0\nnan,0,0,0\n");
  CHECK_THROWS_AS(load_dataset(dir.file("d.csv"), CsvSchema{}), ValidationError);
  CHECK_THROWS_AS(load_dataset(dir.file("missing.csv"), CsvSchema{}), IoError);
}

TEST_CASE("write_dataset then load_dataset round-trips exactly") {
  DgpConfig cfg;
  cfg.n = 300;
  cfg.seed = 11;
  const LotDataset d = simulate_lots(cfg).first;
  testing::TempDir dir("rt");
  CsvSchema schema;
  schema.lot_id = "lot_id";
  write_dataset(dir.file("d.csv"), d, schema);
  const LotDataset back = load_dataset(dir.file("d.csv"), schema);
  CHECK(back.y == d.y);
  CHECK(back.a == d.a);
  CHECK(back.x == d.x);
  CHECK(back.lot_id == d.lot_id);
}

TEST_CASE("pca of two collinear points") {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 1, 1;
  const PcaModel m = fit_pca(x);
  CHECK(m.explained_variance[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(m.explained_variance[1]) < 1e-12);
  CHECK(m.components(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(m.components(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("pca with a constant second coordinate") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 2, 0, 5, 0;
  const PcaModel m = fit_pca(x);
  CHECK(m.explained_variance[1] == 0.0);
}

TEST_CASE("pca invariants on anisotropic gaussian data") {
  Eigen::MatrixXd x = testing::normal_matrix(10000, 2, 5);
  x.col(0) *= 3.0;
  Eigen::Matrix2d rot;
  const double t = 0.4;
  rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  x = x * rot.transpose();
  const PcaModel m = fit_pca(x);

  CHECK((m.components * m.components.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(m.explained_variance[0] >= m.explained_variance[1]);
  CHECK(m.explained_variance[1] >= 0.0);
  CHECK(m.explained_variance[0] / m.explained_variance[1] == doctest::Approx(9.0).epsilon(0.1));
  for (Eigen::Index r = 0; r < 2; ++r) {
    Eigen::Index arg;
    m.components.row(r).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components(r, arg) > 0.0);
  }

  const Eigen::MatrixXd s = transform_pca(m, x);
  CHECK(s.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd c = s.rowwise() - s.colwise().mean();
  const double cov = c.col(0).dot(c.col(1));
  const double corr = cov / std::sqrt(c.col(0).squaredNorm() * c.col(1).squaredNorm());
  CHECK(std::abs(corr) < 1e-8);
  CHECK((inverse_transform_pca(m, s) - x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(transform_pca(m, m.mean.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca errors") {
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(5, 2)), DegenerateDataError);
  Eigen::MatrixXd x(3, 2);
  x << 0, 1, 2, 3, 4, 7;
  const PcaModel m = fit_pca(x);
  CHECK_THROWS_AS(transform_pca(m, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("assign_folds on balanced arms") {
  Eigen::VectorXd a(10);
  a << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
  const FoldAssignment f = assign_folds(a, 5, 3);
  for (int k = 0; k < 5; ++k) {
    const auto rows = f.rows_in(k);
    REQUIRE(rows.size() == 2);
    CHECK(a[static_cast<Eigen::Index>(rows[0])] + a[static_cast<Eigen::Index>(rows[1])] == 1.0);
  }
  CHECK(assign_folds(a, 5, 3).fold_of == f.fold_of);
}

TEST_CASE("assign_folds at the plant sample size") {
  const Eigen::Index n = 32669;
  Eigen::VectorXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = (i % 100) < 21 ? 1.0 : 0.0;
  const FoldAssignment f = assign_folds(a, 5, 9);
  std::vector<std::size_t> sizes;
  for (int k = 0; k < 5; ++k) sizes.push_back(f.rows_in(k).size());
  for (auto s : sizes) CHECK((s == 6533 || s == 6534));
  // Partition and per-arm balance.
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < 5; ++k) {
    std::size_t treated = 0;
    for (auto i : f.rows_in(k)) {
      ++seen[i];
      treated += a[static_cast<Eigen::Index>(i)] == 1.0;
    }
    CHECK(treated >= 1373);
    CHECK(treated <= 1374);
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("assign_folds rejects an arm smaller than k") {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(20);
  a[0] = a[1] = 1.0;
  CHECK_THROWS_AS(assign_folds(a, 5, 1), StratificationError);
}

TEST_CASE("simulate_lots is deterministic and honours its oracle") {
  DgpConfig cfg;
  cfg.n = 2000;
  cfg.seed = 3;
  const auto [d1, t1] = simulate_lots(cfg);
  const auto [d2, t2] = simulate_lots(cfg);
  CHECK(d1.y == d2.y);
  CHECK(d1.x == d2.x);
  CHECK(d1.a == d2.a);
  CHECK(t1.theta_ate == 0.5);

  cfg.effect_level = 0.0;
  CHECK(oracle_truth(cfg).theta_ate == 0.0);

  cfg.effect_fn = EffectShape::linear;
  cfg.effect_slope = 1.0;
  const OracleTruth lin = oracle_truth(cfg);
  CHECK(std::abs(lin.theta_ate) < 2e-3);
  CHECK(lin.mc_draws >= 1000000);

  for (Eigen::Index i = 0; i < d1.x.rows(); ++i) {
    const double m = t1.propensity(d1.x.row(i));
    CHECK(m >= kPropensityFloor);
    CHECK(m <= kPropensityCeil);
  }
}

TEST_CASE("dgp validation") {
  DgpConfig cfg;
  cfg.noise_sd = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
