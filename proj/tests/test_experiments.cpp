#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "fri/experiments.hpp"
#include "fri/potential.hpp"
#include "fri/stats.hpp"

using namespace fri;

TEST_CASE("experiment kinds have stable names") {
  for (const char* name : {"chemdist", "shape", "uniqueness", "crossing",
                           "qip", "validate", "t_sweep"})
    REQUIRE(std::string(kind_name(kind_from_name(name))) == name);
  REQUIRE(kind_from_name("tsweep") == ExperimentKind::t_sweep);
  REQUIRE_THROWS_AS(kind_from_name("nope"), std::invalid_argument);
}

TEST_CASE("experiment configs reject inconsistent values") {
  const auto expect_bad = [](auto&& tweak) {
    ExperimentConfig cfg;
    tweak(cfg);
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  };
  ExperimentConfig ok;
  ok.validate();  // the default config is self-consistent

  expect_bad([](ExperimentConfig& c) { c.window_radius = 0; });
  expect_bad([](ExperimentConfig& c) { c.replicas = 0; });
  expect_bad([](ExperimentConfig& c) { c.margin = -2; });
  expect_bad([](ExperimentConfig& c) { c.margin_epsilon = 0.5; });
  expect_bad([](ExperimentConfig& c) { c.threads = -1; });
  expect_bad([](ExperimentConfig& c) { c.significance = 0.0; });
  expect_bad([](ExperimentConfig& c) { c.max_expected_steps = 10.0; });
  expect_bad([](ExperimentConfig& c) { c.fri.u = 0.0; });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::chemdist;
    c.target_radii = {8, 8};
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::chemdist;
    c.target_radii = {200};
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::shape;
    c.n_grid = {10, 15};  // 10 does not divide 15
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::shape;
    c.shape_grid = 3;
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::uniqueness;
    c.r_grid = {40};  // needs window >= 80
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::crossing;
    c.crossing_axis = 3;
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::qip;
    c.walk_horizon = 1;
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::validate;
    c.lucky_radii = {99};  // exceeds B(1.5 sqrt(lucky_t))
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::validate;
    c.lucky_inner = 3.0;
    c.lucky_outer = 2.0;
  });
  expect_bad([](ExperimentConfig& c) {
    c.kind = ExperimentKind::t_sweep;
    c.t_grid = {50.0, 25.0};
  });
}

TEST_CASE("config echo omits the thread count") {
  ExperimentConfig cfg;
  cfg.threads = 7;
  const json j = config_to_json(cfg);
  REQUIRE(!j.contains("threads"));
  REQUIRE(j.at("kind") == "validate");
}

TEST_CASE("resolved margin honors explicit settings") {
  ExperimentConfig cfg;
  cfg.margin = 9;
  REQUIRE(resolved_margin(cfg, cfg.fri, 16) == 9);
  cfg.margin = -1;
  cfg.margin_epsilon = 1e-2;
  REQUIRE(resolved_margin(cfg, cfg.fri, 16) ==
          recommended_margin(cfg.fri, 16, 1e-2));
}

TEST_CASE("bit masks round trip through hex") {
  rng::Stream g(5150);
  for (int64_t cells : {1, 7, 8, 9, 64, 301}) {
    std::vector<uint8_t> mask(static_cast<size_t>(cells));
    for (auto& b : mask) b = static_cast<uint8_t>(g.next_below(2));
    const std::string hex = detail::mask_to_hex(mask);
    REQUIRE(hex.size() == 2 * static_cast<size_t>((cells + 7) / 8));
    REQUIRE(detail::mask_from_hex(hex, cells) == mask);
  }
  REQUIRE_THROWS_AS(detail::mask_from_hex("0g", 8), std::invalid_argument);
}

TEST_CASE("site law histograms follow the per-site laws") {
  const FriParams p{0.8, 3.0, 3};
  const SiteLawHistograms h = site_law_histograms(p, 8, 424242);
  REQUIRE(h.sites == 17 * 17 * 17);
  int64_t site_total = 0, traj_total = 0;
  for (size_t k = 0; k < h.count_hist.size(); ++k) {
    site_total += h.count_hist[k];
    traj_total += static_cast<int64_t>(k) * h.count_hist[k];
  }
  REQUIRE(site_total == h.sites);
  REQUIRE(traj_total == h.trajectories);
  int64_t len_total = 0;
  for (int64_t c : h.length_hist) len_total += c;
  REQUIRE(len_total == h.trajectories);

  // Per-site counts are Poisson(2du/(T+1)); lengths are geometric.
  REQUIRE(!stats::poisson_gof(h.count_hist, p.site_rate(), 0.005).reject);
  REQUIRE(!stats::geometric_gof(h.length_hist, 1.0 / (p.T + 1.0), 0.005)
               .reject);
}

TEST_CASE("window hit counts are poisson with the capacity rate") {
  const FriParams p{1.0, 10.0, 3};
  const int32_t k_radius = 2;
  const int margin = recommended_margin(p, k_radius, 0.01);
  const int windows = 120;
  std::vector<int64_t> hist(1, 0);
  double mean = 0.0;
  for (int i = 0; i < windows; ++i) {
    const int64_t hits =
        hit_count_one(p, k_radius, margin, rng::derive(31337, i));
    if (hits >= static_cast<int64_t>(hist.size()))
      hist.resize(static_cast<size_t>(hits) + 1, 0);
    ++hist[static_cast<size_t>(hits)];
    mean += static_cast<double>(hits) / windows;
  }
  const double cap = equilibrium_solve(box_sites(Box{Site{}, k_radius}, p.d),
                                       p.d, p.survival(), 1e-8)
                         .capacity;
  const double lambda = 2.0 * p.d * p.u * cap;
  REQUIRE(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / windows));
  REQUIRE(!stats::poisson_gof(hist, lambda, 0.005).reject);
}

TEST_CASE("thin comparison is deterministic and well formed") {
  const FriParams p{1.0, 5.0, 3};
  const ThinComparison a = thin_compare_replica(p, 6, 4, 3, 99);
  const ThinComparison b = thin_compare_replica(p, 6, 4, 3, 99);
  REQUIRE(a.grid_cells == 15 * 15 * 15);
  REQUIRE(a.direct_bonds > 0);
  REQUIRE(a.union_bonds > 0);
  REQUIRE(a.direct_bonds == b.direct_bonds);
  REQUIRE(a.union_bonds == b.union_bonds);
  REQUIRE(a.direct_giant == b.direct_giant);
  REQUIRE(a.union_giant == b.union_giant);
  REQUIRE_THROWS_AS(thin_compare_replica(p, 6, 4, 1, 99),
                    std::invalid_argument);
}

namespace {

ExperimentConfig tiny_chemdist() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::chemdist;
  cfg.fri = FriParams{1.0, 5.0, 3};
  cfg.window_radius = 8;
  cfg.replicas = 6;
  cfg.margin = 4;
  cfg.seed = 33;
  cfg.target_radii = {2, 4};
  return cfg;
}

}  // namespace

TEST_CASE("experiments are pure functions of config and seed") {
  ExperimentConfig cfg = tiny_chemdist();
  cfg.threads = 1;
  const ExperimentResult one = run_experiment(cfg);
  cfg.threads = 3;
  const ExperimentResult three = run_experiment(cfg);
  REQUIRE(one.rows == three.rows);  // byte-identical serialized rows
  REQUIRE(one.aggregates.dump() == three.aggregates.dump());
  REQUIRE(one.aggregates.at("rows").get<int64_t>() ==
          static_cast<int64_t>(one.rows.size()));

  // Aggregation is recomputable from the serialized rows alone.
  std::vector<json> reparsed;
  for (const std::string& line : one.rows)
    reparsed.push_back(json::parse(line));
  REQUIRE(aggregate_rows(cfg, reparsed).dump() == one.aggregates.dump());

  ExperimentConfig other = tiny_chemdist();
  other.seed = 34;
  const ExperimentResult different = run_experiment(other);
  REQUIRE(different.rows != one.rows);
}

TEST_CASE("failed checks mirror the aggregate check list") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::validate;
  cfg.fri = FriParams{0.5, 3.0, 3};
  cfg.replicas = 60;     // hit-count windows (goodness of fit needs >= 50)
  cfg.margin = 8;
  cfg.seed = 71;
  cfg.k_radius = 1;
  cfg.site_law_radius = 4;
  cfg.thin_replicas = 4;
  cfg.thin_window = 6;
  cfg.lucky_replicas = 8;
  cfg.lucky_window = 4;
  cfg.lucky_radii = {1};
  cfg.lucky_t = 4.0;
  const ExperimentResult res = run_experiment(cfg);
  std::vector<std::string> bad;
  for (const json& c : res.aggregates.at("checks"))
    if (!c.at("pass").get<bool>())
      bad.push_back(c.at("name").get<std::string>());
  REQUIRE(res.failed_checks == bad);
  REQUIRE(res.aggregates.at("checks").size() >= 5);
}
