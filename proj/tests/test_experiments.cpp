#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridless/experiments.hpp"

using namespace gridless;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gridless_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string validation_message(const json& j) {
  try {
    parse_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

json small_complete() {
  return json{{"kind", "complete"}, {"seed", 5},       {"n", 16},      {"m", {8, 12}},
              {"L", {1, 3}},        {"r", 2},          {"trials", 3},  {"min_separation", 0.0625},
              {"coefficients", "unit-phase"}};
}

}  // namespace

TEST_CASE("fnv1a64 reference values", "[experiments]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("experiment kinds round trip", "[experiments]") {
  for (ExperimentKind k : {ExperimentKind::Complete, ExperimentKind::Denoise, ExperimentKind::Covariance,
                           ExperimentKind::PhaseTransition, ExperimentKind::CrbCompare,
                           ExperimentKind::BaselineCompare, ExperimentKind::Localize})
    CHECK(parse_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_kind("nope"), ValidationError);
}

TEST_CASE("config defaults and overrides", "[experiments]") {
  const ExperimentConfig c = parse_config(json{{"kind", "complete"}, {"seed", 1}, {"n", 10}});
  CHECK(c.m == std::vector<Eigen::Index>{10});
  CHECK(c.seed == 1);
  CHECK(parse_config(json{{"kind", "complete"}, {"seed", 1}}, false, 99).seed == 99);
  CHECK(parse_config(json{{"kind", "complete"}}, false, 3).seed == 3);

  const json j{{"kind", "complete"}, {"seed", 1}, {"trials", 2}, {"full", {{"trials", 40}}}};
  CHECK(parse_config(j).trials == 2);
  CHECK(parse_config(j, true).trials == 40);
  CHECK(parse_config(j, true).effective.at("trials") == 40);
  CHECK_FALSE(parse_config(j, true).effective.contains("full"));
}

TEST_CASE("config errors are reported together", "[experiments]") {
  const std::string msg = validation_message(json{{"kind", "complete"}, {"n", 8}, {"m", 9}, {"bogus", 1}, {"eps", 2.0}});
  CHECK(msg.find("'seed'") != std::string::npos);
  CHECK(msg.find("'m'") != std::string::npos);
  CHECK(msg.find("bogus") != std::string::npos);
  CHECK(msg.find("'eps'") != std::string::npos);

  CHECK_FALSE(validation_message(json{{"seed", 1}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "zzz"}, {"seed", 1}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "denoise"}, {"seed", 1}, {"sigma", 0.0}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "covariance"}, {"seed", 1}, {"mask", "entrywise"}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "complete"}, {"seed", 1}, {"r", 2}, {"freqs", {0.1}}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "complete"}, {"seed", 1}, {"L", {0}}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "complete"}, {"seed", 1}, {"n", "big"}}).empty());
  CHECK_FALSE(validation_message(json{{"kind", "crb-compare"}, {"seed", 1}, {"r", 3}, {"sigma", 0.1}}).empty());
}

TEST_CASE("shipped configs validate", "[experiments]") {
  for (const auto& e : std::filesystem::directory_iterator(GRIDLESS_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(parse_config(load_json_file(e.path().string())));
    CHECK_NOTHROW(parse_config(load_json_file(e.path().string()), true));
  }
  CHECK_THROWS_AS(load_json_file("/nonexistent/config.json"), IoError);
}

TEST_CASE("zero trials gives an empty aggregate with a header", "[experiments]") {
  json j = small_complete();
  j["trials"] = 0;
  const auto dir = fresh_dir("zero");
  RunOptions opts;
  opts.output_dir = dir.string();
  const RunResult res = run_experiment(parse_config(j), opts);
  CHECK(res.trials.size() == 0);
  CHECK(res.aggregate.size() == 0);
  const std::string agg = slurp(dir / "aggregate.csv");
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 1);
  CHECK(agg.find("normalized_error_mean") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
}

TEST_CASE("results do not depend on the thread count", "[experiments]") {
  const ExperimentConfig cfg = parse_config(small_complete());
  const auto d1 = fresh_dir("t1");
  const auto d3 = fresh_dir("t3");
  RunOptions o1{d1.string(), 1};
  RunOptions o3{d3.string(), 3};
  const RunResult r1 = run_experiment(cfg, o1);
  run_experiment(cfg, o3);
  CHECK(slurp(d1 / "trials.csv") == slurp(d3 / "trials.csv"));
  CHECK(slurp(d1 / "aggregate.csv") == slurp(d3 / "aggregate.csv"));

  REQUIRE(r1.trials.size() == 12);
  REQUIRE(r1.aggregate.size() == 4);
  for (std::size_t i = 0; i < r1.trials.size(); ++i) {
    CHECK(r1.trials.text(i, "status") == "ok");
    CHECK(static_cast<std::uint64_t>(r1.trials.number(i, "trial_seed")) == (5ULL ^ i));
  }
  for (std::size_t i = 0; i < r1.aggregate.size(); ++i) CHECK(r1.aggregate.number(i, "trials") == 3.0);

  const json m = json::parse(slurp(d1 / "manifest.json"));
  CHECK(m.at("kind") == "complete");
  CHECK(m.at("seed") == 5);
  CHECK(m.at("points") == 4);
  CHECK(m.at("trials_per_point") == 3);
  char want[40];
  std::snprintf(want, sizeof want, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(cfg.effective.dump())));
  CHECK(m.at("config_hash") == want);
  CHECK(m.at("version") == library_version());

  const std::string timings = slurp(d1 / "timings.csv");
  CHECK(timings.rfind("index,trial,seconds\n", 0) == 0);
  CHECK(std::count(timings.begin(), timings.end(), '\n') == 13);
}

TEST_CASE("aggregate means and medians match the trial table", "[experiments]") {
  const RunResult r = run_experiment(parse_config(small_complete()), {"", 1});
  for (std::size_t a = 0; a < r.aggregate.size(); ++a) {
    std::vector<double> errs;
    int success = 0;
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      if (r.trials.number(i, "m") != r.aggregate.number(a, "m") || r.trials.number(i, "L") != r.aggregate.number(a, "L"))
        continue;
      errs.push_back(r.trials.number(i, "normalized_error"));
      success += r.trials.flag(i, "success") ? 1 : 0;
    }
    REQUIRE(errs.size() == 3);
    std::sort(errs.begin(), errs.end());
    CHECK(r.aggregate.number(a, "normalized_error_median") == errs[1]);
    CHECK(r.aggregate.number(a, "normalized_error_mean") == Catch::Approx((errs[0] + errs[1] + errs[2]) / 3).epsilon(1e-14));
    CHECK(r.aggregate.number(a, "success_rate") == Catch::Approx(success / 3.0));
  }
}

TEST_CASE("every experiment kind runs at small size", "[experiments]") {
  const std::vector<json> configs{
      json{{"kind", "denoise"}, {"seed", 2}, {"n", 16}, {"r", 2}, {"L", 2}, {"sigma", 0.1}, {"trials", 2},
           {"min_separation", 0.1}},
      json{{"kind", "covariance"}, {"seed", 3}, {"n", 16}, {"m", 6}, {"r", 2}, {"L", 50}, {"trials", 2},
           {"min_separation", 0.1}},
      json{{"kind", "phase-transition"}, {"seed", 4}, {"n", 16}, {"m", 8}, {"r", 2}, {"L", 4}, {"sigma", 0.05},
           {"trials", 2}, {"min_separation", 0.1}},
      json{{"kind", "crb-compare"}, {"seed", 5}, {"n", 16}, {"r", 2}, {"L", 4}, {"sigma", 0.05}, {"trials", 2},
           {"freqs", {0.1, 0.6}}, {"mask", "full"}},
      json{{"kind", "baseline-compare"}, {"seed", 6}, {"n", 16}, {"m", 10}, {"r", 2}, {"L", 20}, {"sigma", 0.0},
           {"trials", 2}, {"min_separation", 0.1}},
      json{{"kind", "localize"}, {"seed", 7}, {"n", 16}, {"r", 2}, {"L", 4}, {"trials", 1}, {"mask", "full"}},
      json{{"kind", "complete"}, {"seed", 8}, {"n", 16}, {"m", 10}, {"r", 2}, {"L", 2}, {"trials", 2},
           {"mask", "entrywise"}, {"min_separation", 0.1}},
  };
  for (const json& j : configs) {
    INFO(j.dump());
    const RunResult r = run_experiment(parse_config(j), {"", 1});
    REQUIRE(r.trials.size() > 0);
    for (std::size_t i = 0; i < r.trials.size(); ++i) CHECK(r.trials.text(i, "status") == "ok");
  }
}
