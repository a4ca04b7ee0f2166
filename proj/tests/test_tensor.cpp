#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <set>

#include "netregime/errors.hpp"
#include "netregime/rng.hpp"
#include "netregime/tensor.hpp"
#include "test_util.hpp"

using namespace netregime;

namespace {

KeyFigureSet figures3() { return KeyFigureSet::from_ordered_names({"P", "Q", "R"}); }

std::vector<WeekIndex> weeks_of(int n) { return make_weeks(parse_date("2018-01-01"), n); }

Eigen::MatrixXi sym3(std::initializer_list<int> upper) {
  // entries (0,1), (0,2), (1,2)
  auto it = upper.begin();
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(3, 3);
  m(0, 1) = m(1, 0) = *it++;
  m(0, 2) = m(2, 0) = *it++;
  m(1, 2) = m(2, 1) = *it;
  return m;
}

}  // namespace

TEST_CASE("assign_week maps dates to 7-day bins from the epoch") {
  const Date epoch = parse_date("2018-01-01");
  CHECK(assign_week(parse_date("2018-01-01"), epoch).t == 1);
  CHECK(assign_week(parse_date("2018-01-07"), epoch).t == 1);
  CHECK(assign_week(parse_date("2018-01-08"), epoch).t == 2);
  CHECK(assign_week(parse_date("2018-02-12"), epoch).t == 7);
  const WeekIndex w2 = assign_week(parse_date("2018-01-10"), epoch);
  CHECK(w2.start == parse_date("2018-01-08"));
  CHECK(w2.end == parse_date("2018-01-14"));
  CHECK_THROWS_AS(assign_week(parse_date("2017-12-31"), epoch), ValidationError);
}

TEST_CASE("24 weeks from the default epoch end on 2018-06-17") {
  const auto weeks = make_weeks(parse_date("2018-01-01"), 24);
  REQUIRE(weeks.size() == 24);
  CHECK(weeks.front().start == parse_date("2018-01-01"));
  CHECK(weeks.front().end == parse_date("2018-01-07"));
  CHECK(weeks.back().t == 24);
  CHECK(weeks.back().start == parse_date("2018-06-11"));
  CHECK(weeks.back().end == parse_date("2018-06-17"));
}

TEST_CASE("occurrence matrix and co-occurrence slice match a hand count") {
  const KeyFigureSet figs = figures3();
  const std::vector<std::pair<std::string, std::set<std::string>>> arts{
      {"x", {"P", "Q"}},
      {"y", {"Q"}},
      {"z", {"P", "Q", "R"}},
  };
  const OccurrenceMatrix occ = build_occurrence_matrix(arts, figs);
  REQUIRE(occ.indicators.rows() == 3);
  REQUIRE(occ.indicators.cols() == 3);
  CHECK(occ.article_ids == std::vector<std::string>{"x", "y", "z"});
  Eigen::MatrixXi expected_ind(3, 3);
  expected_ind << 1, 0, 1,  //
      1, 1, 1,              //
      0, 0, 1;
  CHECK((occ.indicators.array() == expected_ind.array()).all());

  const Eigen::MatrixXi slice = cooccurrence_slice(occ);
  CHECK((slice.array() == sym3({2, 1, 1}).array()).all());
  // with the diagonal kept, entry (i,i) counts articles mentioning figure i
  const Eigen::MatrixXi with_diag = cooccurrence_slice(occ, false);
  CHECK(with_diag(0, 0) == 2);
  CHECK(with_diag(1, 1) == 3);
  CHECK(with_diag(2, 2) == 1);
}

TEST_CASE("occurrence matrix rejects mentions outside the figure set") {
  CHECK_THROWS_AS(build_occurrence_matrix({{"x", {"P", "Nobody"}}}, figures3()),
                  ValidationError);
}

TEST_CASE("assemble_tensor validates its invariants and names the violation") {
  auto good = [] {
    return std::vector<Eigen::MatrixXi>{sym3({1, 0, 2}), sym3({0, 3, 1})};
  };
  CHECK_NOTHROW(assemble_tensor(good(), figures3(), weeks_of(2)));

  SUBCASE("slice count must match the week list") {
    CHECK_THROWS_AS(assemble_tensor(good(), figures3(), weeks_of(3)), ValidationError);
  }
  SUBCASE("asymmetry is reported with its coordinates") {
    auto slices = good();
    slices[1](0, 2) = 9;
    try {
      assemble_tensor(std::move(slices), figures3(), weeks_of(2));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("t=2") != std::string::npos);
    }
  }
  SUBCASE("negative entries are rejected") {
    auto slices = good();
    slices[0](1, 2) = slices[0](2, 1) = -1;
    CHECK_THROWS_AS(assemble_tensor(std::move(slices), figures3(), weeks_of(2)),
                    ValidationError);
  }
  SUBCASE("diagonal must stay zero") {
    auto slices = good();
    slices[0](1, 1) = 4;
    CHECK_THROWS_AS(assemble_tensor(std::move(slices), figures3(), weeks_of(2)),
                    ValidationError);
  }
  SUBCASE("slices must be square and same-sized") {
    std::vector<Eigen::MatrixXi> slices{Eigen::MatrixXi::Zero(3, 3),
                                        Eigen::MatrixXi::Zero(2, 2)};
    CHECK_THROWS_AS(assemble_tensor(std::move(slices), figures3(), weeks_of(2)),
                    ValidationError);
  }
}

TEST_CASE("drop_figures removes rows and columns and keeps order") {
  const auto tensor = assemble_tensor({sym3({1, 2, 3})}, figures3(), weeks_of(1));
  const auto reduced = drop_figures(tensor, {"Q"});
  REQUIRE(reduced.n() == 2);
  CHECK(reduced.figures.names == std::vector<std::string>{"P", "R"});
  CHECK(reduced.Y[0](0, 1) == 2);  // former (P, R) entry
  CHECK(reduced.Y[0](1, 0) == 2);
  CHECK_THROWS_AS(drop_figures(tensor, {"Nobody"}), ValidationError);
}

TEST_CASE("degree correction on a two-node matrix matches hand algebra") {
  // eigenvalues of [[2,-3],[-3,2]] are 5 and -1; the principal one is 5 with
  // unit eigenvector (1,-1)/sqrt(2), sign-fixed to put +1 first
  Eigen::MatrixXd Y(2, 2);
  Y << 2, -3, -3, 2;
  const DegreeCorrection dc = degree_correct(Y);
  CHECK(dc.principal_eigenvalue == doctest::Approx(5.0).epsilon(1e-12));
  Eigen::MatrixXd omega(2, 2);
  omega << 2.5, -2.5, -2.5, 2.5;
  CHECK((dc.Omega - omega).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Y - dc.B - dc.Omega).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degree correction keeps a dominant negative eigenvalue") {
  Eigen::MatrixXd Y(2, 2);
  Y << -4, 1, 1, -2;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Y);
  // eigenvalues are -3 -+ sqrt(2); the dominant one is negative
  const double lam = es.eigenvalues()(0);
  REQUIRE(lam < 0.0);
  const DegreeCorrection dc = degree_correct(Y);
  CHECK(dc.principal_eigenvalue == doctest::Approx(lam).epsilon(1e-12));
  CHECK(dc.principal_eigenvalue < 0.0);
  // Omega has rank one: its second eigenvalue vanishes
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eo(dc.Omega);
  double second = 1e9;
  for (int i = 0; i < 2; ++i) {
    second = std::min(second, std::abs(eo.eigenvalues()(i)));
  }
  CHECK(second < 1e-12);
}

TEST_CASE("a modulus tie resolves to the positive eigenvalue") {
  Eigen::MatrixXd Y(2, 2);
  Y << 0, 2, 2, 0;  // eigenvalues +-2
  const DegreeCorrection dc = degree_correct(Y);
  CHECK(dc.principal_eigenvalue == doctest::Approx(2.0).epsilon(1e-12));
  Eigen::MatrixXd omega(2, 2);
  omega << 1, 1, 1, 1;
  CHECK((dc.Omega - omega).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the zero matrix passes through untouched") {
  const DegreeCorrection dc = degree_correct(Eigen::MatrixXd::Zero(4, 4));
  CHECK(dc.principal_eigenvalue == 0.0);
  CHECK(dc.Omega.isZero(0.0));
  CHECK(dc.B.isZero(0.0));
}

TEST_CASE("degree correction rejects asymmetric input") {
  Eigen::MatrixXd Y(2, 2);
  Y << 0, 1, 2, 0;
  CHECK_THROWS_AS(degree_correct(Y), ValidationError);
}

TEST_CASE("spectral invariants hold over random symmetric count matrices") {
  Rng rng(2024);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform() * 12);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        Y(i, j) = Y(j, i) = static_cast<double>(rng.poisson(3.0));
      }
    }
    const DegreeCorrection dc = degree_correct(Y);
    CHECK((Y - dc.B - dc.Omega).cwiseAbs().maxCoeff() <= 1e-9);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(Y);
    double principal = 0.0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(ey.eigenvalues()(i)) > std::abs(principal)) {
        principal = ey.eigenvalues()(i);
      }
    }
    CHECK(std::abs(std::abs(dc.principal_eigenvalue) - std::abs(principal)) <= 1e-9);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eo(dc.Omega);
    int above = 0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(eo.eigenvalues()(i)) > 1e-9 * std::max(1.0, std::abs(principal))) {
        ++above;
      }
    }
    CHECK(above <= 1);  // rank one
  }
}

TEST_CASE("degree_correct_tensor carries per-week eigenvalues") {
  const auto tensor =
      assemble_tensor({sym3({1, 0, 2}), sym3({4, 1, 1})}, figures3(), weeks_of(2));
  const CorrectedTensor ct = degree_correct_tensor(tensor);
  REQUIRE(ct.t() == 2);
  REQUIRE(ct.principal_eigenvalues.size() == 2);
  for (int t = 0; t < 2; ++t) {
    const Eigen::MatrixXd Y = tensor.Y[t].cast<double>();
    CHECK((Y - ct.B[t] - ct.Omega[t]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("degree centrality is the weighted row sum") {
  const auto tensor = assemble_tensor({sym3({2, 1, 1})}, figures3(), weeks_of(1));
  const Eigen::MatrixXd deg = degree_centrality(tensor);
  REQUIRE(deg.rows() == 3);
  REQUIRE(deg.cols() == 1);
  CHECK(deg(0, 0) == doctest::Approx(3.0));
  CHECK(deg(1, 0) == doctest::Approx(3.0));
  CHECK(deg(2, 0) == doctest::Approx(2.0));
}

TEST_CASE("betweenness of a star centers all pair paths on the hub") {
  const int n = 5;
  Eigen::MatrixXi star = Eigen::MatrixXi::Zero(n, n);
  for (int leaf = 1; leaf < n; ++leaf) star(0, leaf) = star(leaf, 0) = 1;
  const auto figs = KeyFigureSet::from_ordered_names({"hub", "l1", "l2", "l3", "l4"});
  const auto tensor = assemble_tensor({star}, figs, weeks_of(1));
  const Eigen::MatrixXd bc = betweenness_centrality(tensor);
  CHECK(bc(0, 0) == doctest::Approx(6.0));  // all 4C2 leaf pairs route via hub
  for (int leaf = 1; leaf < n; ++leaf) CHECK(bc(leaf, 0) == doctest::Approx(0.0));
}

TEST_CASE("betweenness of a path and a disconnected pair") {
  // 0 - 1 - 2 plus isolated 3: only the middle vertex carries a path
  Eigen::MatrixXi chain = Eigen::MatrixXi::Zero(4, 4);
  chain(0, 1) = chain(1, 0) = 1;
  chain(1, 2) = chain(2, 1) = 3;  // weights binarize
  const auto figs = KeyFigureSet::from_ordered_names({"a", "b", "c", "d"});
  const auto tensor = assemble_tensor({chain}, figs, weeks_of(1));
  const Eigen::MatrixXd bc = betweenness_centrality(tensor);
  CHECK(bc(0, 0) == doctest::Approx(0.0));
  CHECK(bc(1, 0) == doctest::Approx(1.0));
  CHECK(bc(2, 0) == doctest::Approx(0.0));
  CHECK(bc(3, 0) == doctest::Approx(0.0));
}

TEST_CASE("tensor save and load round-trips exactly") {
  const auto dir = testutil::scratch_dir("tensor_roundtrip");
  const auto tensor =
      assemble_tensor({sym3({1, 0, 2}), sym3({0, 5, 1})}, figures3(), weeks_of(2));
  save_tensor(tensor, dir);
  const auto loaded = load_tensor(dir);
  REQUIRE(loaded.t() == 2);
  CHECK(loaded.figures.names == tensor.figures.names);
  CHECK((loaded.Y[0].array() == tensor.Y[0].array()).all());
  CHECK((loaded.Y[1].array() == tensor.Y[1].array()).all());
  CHECK(loaded.weeks[1].start == tensor.weeks[1].start);
}

TEST_CASE("save_tensor writes corrected layers when given them") {
  const auto dir = testutil::scratch_dir("tensor_corrected");
  const auto tensor = assemble_tensor({sym3({1, 0, 2})}, figures3(), weeks_of(1));
  const CorrectedTensor ct = degree_correct_tensor(tensor);
  save_tensor(tensor, dir, &ct);
  CHECK(std::filesystem::exists(dir / "B_1.csv"));
  CHECK(std::filesystem::exists(dir / "Y_1.csv"));
  CHECK_NOTHROW(load_tensor(dir));
}

TEST_CASE("load_tensor reports a missing directory") {
  CHECK_THROWS_AS(load_tensor("/nonexistent/tensor_dir"), IoError);
}
