#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "evodef/plant.hpp"
#include "evodef/rng.hpp"
#include "evodef/store.hpp"

using namespace evodef;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() / "evodef-store-tests";
  fs::create_directories(d);
  return d;
}

plant::Trace sample_trace(long rows = 50) {
  plant::PlantSpec spec;
  spec.max_ticks = rows;
  spec.warmup_ticks = rows / 4;
  Config empty;
  plant::SafetyEnvelope env = plant::envelope_from_config(empty);
  plant::Trace t =
      plant::run_episode(spec, env, plant::AttackVector::zero(), spec.warmup_ticks, 99);
  t.episode_id = "sample";
  return t;
}

}  // namespace

TEST_CASE("format_double round trips arbitrary doubles", "[store]") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-12, 12));
    REQUIRE(store::parse_double_strict(store::format_double(v), "t") == v);
  }
  for (double v : {0.0, -0.0, 1e-300, -1e300, 0.1, 1.0 / 3.0})
    REQUIRE(store::parse_double_strict(store::format_double(v), "t") == v);
}

TEST_CASE("trace round trip is field-exact", "[store]") {
  plant::Trace t = sample_trace();
  t.attack = std::vector<double>(plant::kAttackSlotCount, 0.0);
  t.attack[3] = -0.123456789012345678;
  fs::path p = temp_dir() / "roundtrip.csv";
  store::write_trace(t, p.string());
  plant::Trace back = store::read_trace(p.string());
  REQUIRE(back.episode_id == t.episode_id);
  REQUIRE(back.injection_tick == t.injection_tick);
  REQUIRE(back.outcome == t.outcome);
  REQUIRE(back.seed == t.seed);
  REQUIRE(back.shutdown_tick == t.shutdown_tick);
  REQUIRE(back.attack == t.attack);
  REQUIRE(back.labels == t.labels);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    REQUIRE(back.rows[i].tick == t.rows[i].tick);
    REQUIRE(back.rows[i].actuators == t.rows[i].actuators);
    REQUIRE(back.rows[i].sensors == t.rows[i].sensors);
  }
}

TEST_CASE("trace file has one line per row plus header", "[store]") {
  plant::Trace t = sample_trace(40);
  fs::path p = temp_dir() / "counted.csv";
  store::write_trace(t, p.string());
  std::ifstream in(p);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  REQUIRE(lines == t.rows.size() + 1);
}

TEST_CASE("truncated trace names the last valid line", "[store]") {
  plant::Trace t = sample_trace(10);
  fs::path p = temp_dir() / "truncated.csv";
  store::write_trace(t, p.string());
  // chop the final line mid-field
  std::ifstream in(p);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(p, std::ios::trunc);
  out << content.substr(0, content.size() - 30);
  out.close();
  REQUIRE_THROWS_WITH(store::read_trace(p.string()),
                      Catch::Contains("last valid line " + std::to_string(10)));
}

TEST_CASE("trace with bad header is rejected", "[store]") {
  fs::path p = temp_dir() / "badheader.csv";
  std::ofstream out(p);
  out << "nope\n1,2,3\n";
  out.close();
  REQUIRE_THROWS_WITH(store::read_trace(p.string()), Catch::Contains("header"));
}

TEST_CASE("sample metrics: perfect predictions", "[store]") {
  std::vector<std::uint8_t> labels{0, 1, 0, 1, 1};
  auto m = store::compute_sample_metrics(labels, labels);
  REQUIRE(m.accuracy == 1.0);
  REQUIRE(m.f1 == 1.0);
  REQUIRE(m.precision == 1.0);
  REQUIRE(m.recall == 1.0);
}

TEST_CASE("sample metrics: all-normal predictions on a half-abnormal set", "[store]") {
  std::vector<std::uint8_t> labels(100, 0), preds(100, 0);
  for (int i = 0; i < 50; ++i) labels[i] = 1;
  auto m = store::compute_sample_metrics(preds, labels);
  REQUIRE(m.recall == 0.0);
  REQUIRE(m.accuracy == 0.5);
  REQUIRE(m.f1 == 0.0);  // zero convention
  REQUIRE(m.precision == 0.0);
}

TEST_CASE("sample metrics match an independent counting oracle", "[store]") {
  Rng rng(7);
  std::vector<std::uint8_t> preds(1000), labels(1000);
  for (int i = 0; i < 1000; ++i) {
    preds[i] = rng.uniform01() < 0.4 ? 1 : 0;
    labels[i] = rng.uniform01() < 0.3 ? 1 : 0;
  }
  auto m = store::compute_sample_metrics(preds, labels);
  // independent recount
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (int i = 0; i < 1000; ++i) {
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 0 && labels[i] == 0) ++tn;
    if (preds[i] == 1 && labels[i] == 0) ++fp;
    if (preds[i] == 0 && labels[i] == 1) ++fn;
  }
  REQUIRE(m.tp == tp);
  REQUIRE(m.tn == tn);
  REQUIRE(m.fp == fp);
  REQUIRE(m.fn == fn);
  REQUIRE(m.accuracy == Approx(double(tp + tn) / 1000.0));
  double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
  double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
  REQUIRE(m.precision == Approx(prec));
  REQUIRE(m.recall == Approx(rec));
  double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  REQUIRE(m.f1 == Approx(f1));
}

TEST_CASE("sample metrics reject mismatched lengths", "[store]") {
  REQUIRE_THROWS_AS(store::compute_sample_metrics({1, 0}, {1}), std::invalid_argument);
}

TEST_CASE("end-to-end metrics count detections and false alarms", "[store]") {
  using plant::Outcome;
  std::vector<bool> decisions{true, false, true, true, false};
  std::vector<Outcome> outcomes{Outcome::Effective, Outcome::Effective, Outcome::Ineffective,
                                Outcome::ExcludedShort, Outcome::Ineffective};
  auto m = store::compute_end_to_end(decisions, outcomes);
  REQUIRE(m.n_effective == 2);
  REQUIRE(m.n_ineffective == 2);
  REQUIRE(m.detected == 1);
  REQUIRE(m.false_alarms == 1);
  REQUIRE(m.detection_rate == 0.5);
  REQUIRE(m.false_alarm_rate == 0.5);
}

TEST_CASE("manifest round trips and verifies digests", "[store]") {
  fs::path dir = temp_dir() / "manifest-test";
  fs::create_directories(dir);
  std::ofstream(dir / "data.txt") << "hello\n";

  store::CampaignManifest m;
  m.command = "test";
  m.created = store::timestamp_utc();
  m.seed = 42;
  m.config = {{"plant", {{"dt", "0.5"}}}};
  m.files.push_back({"data.txt", store::file_digest((dir / "data.txt").string()), "data"});
  m.extra["note"] = "x";
  store::write_manifest(m, (dir / "manifest.json").string());

  auto back = store::read_manifest((dir / "manifest.json").string());
  REQUIRE(back.command == m.command);
  REQUIRE(back.seed == m.seed);
  REQUIRE(back.config == m.config);
  REQUIRE(back.files.size() == 1);
  REQUIRE(back.files[0].digest == m.files[0].digest);

  REQUIRE(store::verify_manifest(back, dir.string()).empty());
  std::ofstream(dir / "data.txt") << "tampered\n";
  auto errors = store::verify_manifest(back, dir.string());
  REQUIRE(errors.size() == 1);
  REQUIRE_THAT(errors[0], Catch::Contains("digest mismatch"));
  fs::remove(dir / "data.txt");
  errors = store::verify_manifest(back, dir.string());
  REQUIRE(errors.size() == 1);
  REQUIRE_THAT(errors[0], Catch::Contains("missing file"));
}
