#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include "reactor/evaluation.hpp"
#include "reactor/rng.hpp"

using namespace reactor;

namespace {

template <typename F>
StateField field_from(std::size_t n_t, std::size_t n_z, F fn,
                      StateKind kind = StateKind::T) {
  StateField f(kind, n_t, n_z);
  for (std::size_t t = 0; t < n_t; ++t)
    for (std::size_t z = 0; z < n_z; ++z) f.at(t, z) = fn(t, z);
  return f;
}

Grid small_grid(std::size_t n_z, std::size_t n_t) {
  Grid g;
  g.n_z = n_z;
  g.n_t = n_t;
  g.dz = 1.0 / static_cast<double>(n_z - 1);
  g.dt = 1.0;
  g.inlet_xa.assign(n_t, 1.0);
  g.inlet_xp.assign(n_t, 1.0);
  g.inlet_T.assign(n_t, 1.0);
  for (std::size_t j = 0; j < n_t; ++j)
    g.inlet_T[j] = 1.0 + 0.05 * static_cast<double>(j % 3);
  g.theta0.assign(n_z, 1.0);
  g.velocity.assign(n_t, 1.0);
  return g;
}

GridModel small_pde_model() {
  GridModel m;
  m.variant = ModelVariant::pde_param;
  m.pde = PdeCellParams::from_values(
      {0.13, 0.19, 0.05, 0.5, 1.0, 0.64, 1.5, 2.2});
  return m;
}

}  // namespace

TEST_CASE("temperature differences between successive sensor levels") {
  SUBCASE("a field linear in depth gives constant pair series") {
    const StateField T = field_from(
        4, 6, [](std::size_t, std::size_t z) { return 10.0 * z; });
    const std::vector<std::size_t> levels{0, 2, 5};
    const auto d = delta_T(T, levels);
    REQUIRE(d.size() == 2);
    for (double v : d[0]) CHECK(v == doctest::Approx(20.0));
    for (double v : d[1]) CHECK(v == doctest::Approx(30.0));
  }

  SUBCASE("a field constant in depth gives all-zero differences") {
    const StateField T = field_from(
        5, 8, [](std::size_t t, std::size_t) { return 1.0 + 0.1 * t; });
    const std::vector<std::size_t> levels{0, 3, 7};
    for (const auto& series : delta_T(T, levels))
      for (double v : series) CHECK(v == 0.0);
  }

  SUBCASE("a unit step between the two listed levels shows up as one") {
    const StateField T =
        field_from(7, 5, [](std::size_t t, std::size_t z) {
          return 0.5 * t + (z == 4 ? 1.0 : 0.0);
        });
    const std::vector<std::size_t> levels{0, 4};
    const auto d = delta_T(T, levels);
    REQUIRE(d.size() == 1);
    for (double v : d[0]) CHECK(v == doctest::Approx(1.0));
  }

  SUBCASE("the default training layout yields eleven pair series") {
    const SensorLayout layout = make_default_layout(46);
    const StateField T = field_from(
        3, 46, [](std::size_t t, std::size_t z) { return t + 0.01 * z; });
    CHECK(delta_T(T, layout.train_levels).size() == 11);
  }

  SUBCASE("fewer than two levels or bad indices are usage errors") {
    const StateField T = field_from(3, 4, [](std::size_t, std::size_t) {
      return 1.0;
    });
    CHECK_THROWS_AS(delta_T(T, std::vector<std::size_t>{1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(delta_T(T, std::vector<std::size_t>{0, 4}),
                    std::invalid_argument);
  }
}

TEST_CASE("population std and rmse on hand-checked vectors") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(population_std(xs) == doctest::Approx(std::sqrt(1.25)));
  CHECK(population_std(std::vector<double>{3.0, 3.0}) == 0.0);

  const std::vector<double> pred{1.0, 2.0};
  const std::vector<double> zero{0.0, 0.0};
  CHECK(rmse(pred, zero) == doctest::Approx(std::sqrt(2.5)));
  CHECK(rmse(pred, pred) == 0.0);
  CHECK_THROWS_AS(rmse(pred, xs), std::invalid_argument);
  CHECK_THROWS_AS(population_std(std::vector<double>{}),
                  std::invalid_argument);
}

TEST_CASE("normalized rmse pins the mean predictor at one") {
  const std::vector<double> target{1.0, 2.0, 3.0, 4.0};
  const double sd = population_std(target);

  SUBCASE("an offset of one std scores exactly one") {
    std::vector<double> pred = target;
    for (double& v : pred) v += sd;
    CHECK(nrmse(pred, target) == doctest::Approx(1.0));
  }

  SUBCASE("predicting the mean everywhere scores exactly one") {
    const std::vector<double> pred(target.size(), 2.5);
    CHECK(nrmse(pred, target) == doctest::Approx(1.0));
  }

  SUBCASE("a perfect prediction scores zero") {
    CHECK(nrmse(target, target) == 0.0);
  }

  SUBCASE("the score is invariant under affine rescaling of both series") {
    const std::vector<double> pred{1.1, 2.3, 2.7, 4.4};
    const double base = nrmse(pred, target);
    std::vector<double> p2 = pred, t2 = target;
    for (double& v : p2) v = 3.0 * v - 7.0;
    for (double& v : t2) v = 3.0 * v - 7.0;
    CHECK(nrmse(p2, t2) == doctest::Approx(base));
  }

  SUBCASE("a constant target leaves the metric undefined") {
    const std::vector<double> flat{2.0, 2.0, 2.0};
    const std::vector<double> pred{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(nrmse(pred, flat), NumericError);
  }
}

TEST_CASE("coefficient of determination for reference predictors") {
  const std::vector<double> truth{1.0, 2.0, 3.0, 4.0, 5.0};

  CHECK(r2(truth, truth) == doctest::Approx(1.0));

  const std::vector<double> mean_pred(truth.size(), 3.0);
  CHECK(r2(mean_pred, truth) == doctest::Approx(0.0));

  std::vector<double> anti(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) anti[i] = -truth[i];
  CHECK(r2(anti, truth) < 0.0);

  CHECK_THROWS_AS(r2(truth, std::vector<double>{2.0, 2.0, 2.0, 2.0, 2.0}),
                  NumericError);

  SUBCASE("the four-state average mixes the per-state scores") {
    const std::size_t n_t = 3, n_z = 4;
    StateFields truth_f;
    truth_f.xa = field_from(n_t, n_z,
                            [](std::size_t t, std::size_t z) {
                              return 1.0 + 0.1 * t + 0.2 * z;
                            },
                            StateKind::xa);
    truth_f.xp = field_from(n_t, n_z,
                            [](std::size_t t, std::size_t z) {
                              return 2.0 - 0.1 * t + 0.1 * z;
                            },
                            StateKind::xp);
    truth_f.T = field_from(n_t, n_z, [](std::size_t t, std::size_t z) {
      return 1.0 + 0.05 * t * z;
    });
    truth_f.theta = field_from(n_t, n_z,
                               [](std::size_t t, std::size_t z) {
                                 return 1.0 - 0.05 * t - 0.01 * z;
                               },
                               StateKind::theta);
    StateFields pred_f = truth_f;
    // replace the activity prediction by its mean: that one state
    // contributes zero, the other three contribute one
    double mu = 0.0;
    for (double v : truth_f.theta.v) mu += v;
    mu /= static_cast<double>(truth_f.theta.v.size());
    for (double& v : pred_f.theta.v) v = mu;
    CHECK(r2_avg(pred_f, truth_f) == doctest::Approx(0.75));
  }
}

TEST_CASE("pearson correlation of affine maps hits the endpoints") {
  const std::vector<double> a{1.0, 2.0, 4.0, 8.0};
  std::vector<double> up(a.size()), down(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    up[i] = 2.0 * a[i] + 1.0;
    down[i] = -a[i] + 5.0;
  }
  CHECK(pearson(a, up) == doctest::Approx(1.0));
  CHECK(pearson(a, down) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1.0, 1.0, 1.0, 1.0}),
                  NumericError);

  std::mt19937_64 g(11);
  std::vector<double> x(64), y(64);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng::uniform(g, -1.0, 1.0);
    y[i] = rng::uniform(g, -1.0, 1.0);
  }
  const double r = pearson(x, y);
  CHECK(r >= -1.0);
  CHECK(r <= 1.0);
}

TEST_CASE("min max scaling maps onto the unit interval") {
  const std::vector<double> xs{2.0, 4.0, 6.0};
  const std::vector<double> got = min_max_scale(xs);
  REQUIRE(got.size() == 3);
  CHECK(got[0] == 0.0);
  CHECK(got[1] == doctest::Approx(0.5));
  CHECK(got[2] == 1.0);

  for (double v : min_max_scale(std::vector<double>{3.0, 3.0, 3.0}))
    CHECK(v == 0.0);
  CHECK(min_max_scale(std::vector<double>{}).empty());
}

TEST_CASE("gathered series keep level-major order and pool pair-major") {
  const StateField T = field_from(
      3, 4, [](std::size_t t, std::size_t z) { return 10.0 * z + t; });

  const std::vector<std::size_t> two{1, 3};
  const std::vector<double> flat = gather_levels(T, two);
  const std::vector<double> want{10.0, 11.0, 12.0, 30.0, 31.0, 32.0};
  REQUIRE(flat.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(flat[i] == want[i]);

  const std::vector<std::size_t> three{0, 1, 3};
  const std::vector<double> pooled = gather_delta_T(T, three);
  const std::vector<double> want_d{10.0, 10.0, 10.0, 20.0, 20.0, 20.0};
  REQUIRE(pooled.size() == want_d.size());
  for (std::size_t i = 0; i < want_d.size(); ++i)
    CHECK(pooled[i] == want_d[i]);

  SUBCASE("pair differences telescope to the endpoint difference") {
    std::mt19937_64 g(5);
    const StateField R = field_from(6, 9, [&](std::size_t, std::size_t) {
      return rng::uniform(g, 0.0, 2.0);
    });
    const std::vector<std::size_t> levels{1, 3, 4, 8};
    const auto d = delta_T(R, levels);
    for (std::size_t t = 0; t < R.n_t; ++t) {
      double acc = 0.0;
      for (const auto& series : d) acc += series[t];
      CHECK(acc == doctest::Approx(R.at(t, 8) - R.at(t, 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("pooled delta-T nrmse uses one std across all pairs") {
  const StateField truth = field_from(
      3, 4, [](std::size_t t, std::size_t z) { return 10.0 * z + t; });
  StateField pred = truth;
  for (std::size_t t = 0; t < pred.n_t; ++t) pred.at(t, 3) += 1.0;

  // truth differences pool to {10,10,10,20,20,20}: std 5. The prediction
  // shifts only the second pair by one, so the rmse is sqrt(3/6).
  const std::vector<std::size_t> levels{0, 1, 3};
  const double got = delta_T_nrmse(pred, truth, levels);
  CHECK(got == doctest::Approx(std::sqrt(0.5) / 5.0).epsilon(1e-12));

  CHECK(delta_T_nrmse(truth, truth, levels) == 0.0);
}

TEST_CASE("split metrics mark undefined entries as nan") {
  const StateField truth = field_from(
      4, 6, [](std::size_t t, std::size_t z) { return 1.0 + 0.1 * t * z; });
  StateField pred = truth;
  pred.at(2, 3) += 0.05;

  SUBCASE("an empty split carries only nans") {
    const SplitMetrics m =
        eval_split("none", pred, truth, std::vector<std::size_t>{});
    CHECK(m.split == "none");
    CHECK(std::isnan(m.t_nrmse));
    CHECK(std::isnan(m.dt_nrmse));
    CHECK(std::isnan(m.pearson_T));
  }

  SUBCASE("a single level defines point metrics but no differences") {
    const SplitMetrics m =
        eval_split("one", pred, truth, std::vector<std::size_t>{3});
    CHECK(m.t_nrmse >= 0.0);
    CHECK(std::isnan(m.dt_nrmse));
    CHECK(!std::isnan(m.pearson_T));
  }

  SUBCASE("two or more levels define everything") {
    const SplitMetrics m =
        eval_split("two", pred, truth, std::vector<std::size_t>{1, 5});
    CHECK(!std::isnan(m.t_nrmse));
    CHECK(!std::isnan(m.dt_nrmse));
    CHECK(!std::isnan(m.pearson_T));
  }

  SUBCASE("a perfect prediction floors the errors and tops correlation") {
    const SplitMetrics m =
        eval_split("exact", truth, truth, std::vector<std::size_t>{0, 2, 5});
    CHECK(m.t_nrmse == 0.0);
    CHECK(m.dt_nrmse == 0.0);
    CHECK(m.pearson_T == doctest::Approx(1.0));
  }
}

TEST_CASE("metric reports serialize nans as empty or null") {
  MetricReport r;
  r.variant = "pde-param";
  r.dataset = "train";
  r.seed = 3;
  SplitMetrics s;
  s.split = "val1";
  s.t_nrmse = 0.5;
  s.pearson_T = 0.9;  // dt_nrmse stays nan
  r.splits.push_back(s);

  SUBCASE("json uses null and round-trips through a parser") {
    const std::string doc = report_to_json(r);
    const nlohmann::json j = nlohmann::json::parse(doc);
    CHECK(j["variant"] == "pde-param");
    CHECK(j["dataset"] == "train");
    CHECK(j["seed"] == 3);
    CHECK(j["r2_average"].is_null());
    REQUIRE(j["splits"].size() == 1);
    CHECK(j["splits"][0]["split"] == "val1");
    CHECK(j["splits"][0]["t_nrmse"] == doctest::Approx(0.5));
    CHECK(j["splits"][0]["dt_nrmse"].is_null());
    CHECK(j["splits"][0]["pearson_T"] == doctest::Approx(0.9));
    CHECK(doc.back() == '\n');
  }

  SUBCASE("csv rows leave nan cells empty") {
    CHECK(report_csv_header() ==
          "variant,dataset,split,t_nrmse,dt_nrmse,pearson_T,r2_avg");
    const std::vector<std::string> rows = report_csv_rows(r);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == "pde-param,train,val1,0.5,,0.9,");
  }

  SUBCASE("defined averages print with full precision") {
    r.r2_average = 0.123456789012;
    const std::vector<std::string> rows = report_csv_rows(r);
    CHECK(rows[0] == "pde-param,train,val1,0.5,,0.9,0.123456789012");
  }
}

TEST_CASE("outlet crossing time interpolates between steps") {
  auto theta_from = [](std::initializer_list<double> outlet) {
    StateField f(StateKind::theta, outlet.size(), 2);
    std::size_t t = 0;
    for (double v : outlet) {
      f.at(t, 0) = 1.0;
      f.at(t, 1) = v;
      ++t;
    }
    return f;
  };

  SUBCASE("a crossing lands between the bracketing steps") {
    const StateField f = theta_from({1.0, 0.8, 0.4, 0.1});
    // from 0.8 to 0.4 the 0.5 line sits three quarters of the way
    CHECK(outlet_crossing(f, 0.5) == doctest::Approx(1.75));
  }

  SUBCASE("already below at the start reports zero") {
    const StateField f = theta_from({0.2, 0.1});
    CHECK(outlet_crossing(f, 0.5) == 0.0);
  }

  SUBCASE("never strictly below reports the horizon") {
    const StateField f = theta_from({1.0, 0.9, 0.5});
    CHECK(outlet_crossing(f, 0.5) == 3.0);
  }

  SUBCASE("an exact touch interpolates to the step that touched") {
    // 0.5 is reached exactly at step one; the drop below is detected one
    // step later but the interpolated crossing sits at the touch itself
    const StateField f = theta_from({1.0, 0.5, 0.25});
    CHECK(outlet_crossing(f, 0.5) == doctest::Approx(1.0));
  }
}

TEST_CASE("sensitivity sweep with identity multipliers changes nothing") {
  const Grid g = small_grid(4, 6);
  const GridModel m = small_pde_model();
  const std::vector<std::size_t> levels{0, 2, 3};

  SensitivityCase ident;
  ident.name = "identity";
  const SensitivityResponse r = sensitivity_sweep(m, g, levels, ident);

  CHECK(r.name == "identity");
  REQUIRE(r.levels.size() == 3);
  REQUIRE(r.base.size() == 2);
  REQUIRE(r.pert.size() == 2);
  for (std::size_t k = 0; k < r.base.size(); ++k) {
    REQUIRE(r.base[k].size() == r.pert[k].size());
    for (std::size_t t = 0; t < r.base[k].size(); ++t) {
      CHECK(r.base[k][t] == r.pert[k][t]);
      CHECK(r.base[k][t] >= 0.0);
      CHECK(r.base[k][t] <= 1.0);
    }
  }
  CHECK(r.base_cross == r.pert_cross);

  SUBCASE("non-positive multipliers are configuration errors") {
    SensitivityCase bad;
    bad.mult_xa = 0.0;
    CHECK_THROWS_AS(sensitivity_sweep(m, g, levels, bad), ConfigError);
  }
}

TEST_CASE("r2 falls as prediction noise grows") {
  std::vector<double> truth(200);
  for (std::size_t i = 0; i < truth.size(); ++i)
    truth[i] = std::sin(0.05 * static_cast<double>(i)) +
               0.002 * static_cast<double>(i);

  std::mt19937_64 g(17);
  auto noisy = [&](double sd) {
    std::vector<double> out = truth;
    for (double& v : out) v += sd * rng::gaussian(g);
    return out;
  };

  const double small = r2(noisy(0.02), truth);
  const double large = r2(noisy(0.40), truth);
  CHECK(small > 0.99);
  CHECK(small <= 1.0);
  CHECK(large < small);
}
