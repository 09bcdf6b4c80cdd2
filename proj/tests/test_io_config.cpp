#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "fri/config.hpp"
#include "fri/records.hpp"

using namespace fri;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("configs round trip through their canonical text") {
  const ExperimentConfig defaults;
  REQUIRE(parse_config_text(write_config(defaults)) == defaults);

  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::crossing;
  cfg.fri = FriParams{2.5, 42.0, 4};
  cfg.window_radius = 32;
  cfg.replicas = 11;
  cfg.margin = 5;
  cfg.margin_epsilon = 0.125;
  cfg.seed = 987654321012345ULL;
  cfg.threads = 2;
  cfg.significance = 0.05;
  cfg.max_expected_steps = 2e9;
  cfg.target_radii = {3, 9};
  cfg.n_grid = {4, 8};
  cfg.shape_grid = 10;
  cfg.r_grid = {4, 8};
  cfg.cross_grid = {8, 16, 32};
  cfg.crossing_axis = 1;
  cfg.walk_horizon = 50;
  cfg.walks_per_replica = 3;
  cfg.qip_all_occupied = true;
  cfg.k_radius = 2;
  cfg.site_law_radius = 6;
  cfg.thin_replicas = 5;
  cfg.thin_window = 8;
  cfg.lucky_replicas = 3;
  cfg.lucky_window = 6;
  cfg.lucky_radii = {1, 2};
  cfg.lucky_t = 9.0;
  cfg.lucky_inner = 1.5;
  cfg.lucky_outer = 2.75;
  cfg.t_grid = {2.5, 5.0};
  REQUIRE(parse_config_text(write_config(cfg)) == cfg);
}

TEST_CASE("config parsing accepts comments and flexible spacing") {
  const ExperimentConfig cfg = parse_config_text(
      "# leading comment\n"
      "kind=qip   ; trailing comment\n"
      "  u = 2.0\n"
      "\n"
      "[qip]\n"
      "horizon = 100  # steps\n"
      "all_occupied = true\n");
  REQUIRE(cfg.kind == ExperimentKind::qip);
  REQUIRE(cfg.fri.u == 2.0);
  REQUIRE(cfg.walk_horizon == 100);
  REQUIRE(cfg.qip_all_occupied);
  // The same key may appear in different sections.
  const ExperimentConfig two = parse_config_text(
      "[crossing]\ngrid = 4\n[shape]\ngrid = 8\n");
  REQUIRE(two.cross_grid == std::vector<int32_t>{4});
  REQUIRE(two.shape_grid == 8);
}

TEST_CASE("config errors name the offender and its line") {
  const auto fails = [](const std::string& text, const char* needle) {
    REQUIRE_THROWS_MATCHES(parse_config_text(text), std::invalid_argument,
                           Catch::Matchers::MessageMatches(
                               ContainsSubstring(std::string(needle))));
  };
  fails("kind = chemdist\nkind = shape\n", "line 2");
  fails("kind = chemdist\nkind = shape\n", "duplicate key 'kind'");
  fails("[qip]\nhorizon = 5\nhorizon = 6\n", "in section [qip]");
  fails("[nope]\n", "unknown section 'nope'");
  fails("frobnicate = 3\n", "unknown key 'frobnicate'");
  fails("[qip]\nbogus = 1\n", "unknown key 'bogus' in section [qip]");
  fails("u\n", "expected 'key = value'");
  fails("u = abc\n", "bad number 'abc'");
  fails("= 3\n", "empty key");
  fails("u =\n", "empty value");
  fails("[crossing\n", "unterminated section header");
  fails("seed = -1\n", "negative value");
  fails("replicas = 2.5\n", "bad integer");
  fails("[shape]\nn_grid = 4,,8\n", "empty list item");
  fails("[qip]\nall_occupied = yes\n", "expected true or false");
  fails("kind = warp\n", "unknown experiment kind");
  // Values are also validated semantically after parsing.
  REQUIRE_THROWS_AS(parse_config_text("replicas = 0\n"),
                    std::invalid_argument);
}

TEST_CASE("config files load from disk") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fri_cfg_test";
  fs::create_directories(dir);
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::chemdist;
  cfg.seed = 555;
  write_text_file(dir / "a.cfg", write_config(cfg));
  REQUIRE(parse_config((dir / "a.cfg").string()) == cfg);
  REQUIRE_THROWS_AS(parse_config((dir / "missing.cfg").string()),
                    std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("sha256 matches the published test vectors") {
  REQUIRE(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  REQUIRE(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnop"
                     "q") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  REQUIRE(sha256_hex(std::string(1000000, 'a')) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("csv numbers are json-exact with plain infinity spellings") {
  REQUIRE(csv_num(0.25) == "0.25");
  REQUIRE(csv_num(3.0) == "3.0");
  REQUIRE(csv_num(std::numeric_limits<double>::infinity()) == "inf");
  REQUIRE(csv_num(-std::numeric_limits<double>::infinity()) == "-inf");
  REQUIRE(csv_num(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("utc timestamps are iso-8601") {
  const auto epoch = std::chrono::system_clock::from_time_t(0);
  REQUIRE(utc_timestamp(epoch) == "1970-01-01T00:00:00Z");
  REQUIRE(utc_timestamp(std::chrono::system_clock::from_time_t(90061)) ==
          "1970-01-02T01:01:01Z");
}

TEST_CASE("plot data emits the pinned csv headers") {
  json crossing;
  crossing["kind"] = "crossing";
  crossing["per_N"] = json::array(
      {{{"N", 16}, {"frequency", 0.5}, {"wilson_lo", 0.4},
        {"wilson_hi", 0.6}}});
  auto files = emit_plot_data(crossing);
  REQUIRE(files.size() == 1);
  REQUIRE(files[0].first == "crossing.csv");
  REQUIRE(files[0].second == "N,freq,lo,hi\n16,0.5,0.4,0.6\n");

  json uniq;
  uniq["kind"] = "uniqueness";
  uniq["per_R"] = json::array(
      {{{"R", 8}, {"frequency", 0.0}, {"wilson_lo", 0.0},
        {"wilson_hi", 0.05}}});
  files = emit_plot_data(uniq);
  REQUIRE(files[0].first == "uniqueness.csv");
  REQUIRE(files[0].second == "R,freq,lo,hi\n8,0.0,0.0,0.05\n");

  json chem;
  chem["kind"] = "chemdist";
  chem["targets"] = json::array(
      {{{"r", 16}, {"ratio", {{"mean", 2.0}, {"stderr", 0.5}}}},
       {{"r", 32}, {"ratio", json::object()}}});
  files = emit_plot_data(chem);
  REQUIRE(files[0].first == "chemdist.csv");
  const double z = 1.959963984540054;
  const std::string expected = "r,mean_ratio,lo,hi\n16," + csv_num(2.0) +
                               "," + csv_num(2.0 - z * 0.5) + "," +
                               csv_num(2.0 + z * 0.5) +
                               "\n32,nan,nan,nan\n";
  REQUIRE(files[0].second == expected);

  json shape;
  shape["kind"] = "shape";
  shape["steps"] = json::array(
      {{{"n_from", 16}, {"n_to", 32}, {"step", {{"mean", 1.5},
                                                {"stderr", 0.25}}}}});
  files = emit_plot_data(shape);
  REQUIRE(files[0].first == "shape.csv");
  REQUIRE(files[0].second ==
          "n_from,n_to,step,lo,hi\n16,32," + csv_num(1.5) + "," +
              csv_num(1.5 - z * 0.25) + "," + csv_num(1.5 + z * 0.25) + "\n");

  json sweep;
  sweep["kind"] = "t_sweep";
  sweep["per_T"] = json::array(
      {{{"T", 25.0}, {"slope", 0.5}, {"slope_lo", nullptr},
        {"slope_hi", nullptr}}});
  files = emit_plot_data(sweep);
  REQUIRE(files[0].first == "tsweep.csv");
  REQUIRE(files[0].second == "T,slope,lo,hi\n25.0,0.5,nan,nan\n");

  json qip;
  qip["kind"] = "qip";
  REQUIRE_THROWS_AS(emit_plot_data(qip), std::invalid_argument);
  REQUIRE_THROWS_AS(emit_plot_data(json::object()), std::invalid_argument);
}

TEST_CASE("run directories carry rows, aggregates, and a manifest") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::chemdist;
  cfg.fri = FriParams{1.0, 4.0, 3};
  cfg.window_radius = 4;
  cfg.replicas = 2;
  cfg.margin = 2;
  cfg.seed = 7;
  cfg.target_radii = {1};
  const ExperimentResult result = run_experiment(cfg);

  RunManifestInfo info;
  info.threads_resolved = 2;
  info.started = std::chrono::system_clock::from_time_t(1700000000);
  info.finished = std::chrono::system_clock::from_time_t(1700000005);
  const fs::path dir = fs::temp_directory_path() / "fri_run_test";
  fs::remove_all(dir);
  const RunOutput out = write_run(dir, cfg, result, info);

  std::string rows_text;
  for (const std::string& r : result.rows) rows_text += r + "\n";
  REQUIRE(read_text_file(out.rows_path) == rows_text);
  REQUIRE(read_text_file(out.aggregates_path) ==
          result.aggregates.dump(2) + "\n");

  const json manifest = json::parse(read_text_file(out.manifest_path));
  REQUIRE(manifest.at("version") == kToolVersion);
  REQUIRE(manifest.at("kind") == "chemdist");
  REQUIRE(manifest.at("master_seed") == 7);
  REQUIRE(manifest.at("threads") == 2);
  const std::string config_text = manifest.at("config_text");
  REQUIRE(config_text == write_config(cfg));
  REQUIRE(manifest.at("config_digest") ==
          "sha256:" + sha256_hex(config_text));
  REQUIRE(manifest.at("row_count") == 2);
  const std::string status = manifest.at("status");
  REQUIRE((status == "ok" || status == "checks_failed"));
  REQUIRE(manifest.at("outputs").at("rows") == "rows.jsonl");
  REQUIRE(manifest.at("outputs").at("aggregates") == "aggregates.json");
  REQUIRE(manifest.at("started_utc") == "2023-11-14T22:13:20Z");
  REQUIRE(manifest.at("finished_utc") == "2023-11-14T22:13:25Z");

  // Tampered rows no longer reproduce the aggregates byte for byte.
  ExperimentResult tampered = result;
  tampered.rows.pop_back();
  REQUIRE_THROWS_AS(write_run(dir, cfg, tampered, info), std::logic_error);
  fs::remove_all(dir);
}
