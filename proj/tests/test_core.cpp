#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "tpplab/events.hpp"
#include "tpplab/io.hpp"
#include "tpplab/rng.hpp"

using namespace tpp;

namespace {

RawAnnotation ann(const std::string& session, Behavior b, double start_s, double stop_s) {
  RawAnnotation a;
  a.participant_id = "p1";
  a.session_id = session;
  a.behavior = b;
  a.start = static_cast<Tick>(start_s * 4.0);
  a.stop = static_cast<Tick>(stop_s * 4.0);
  return a;
}

SessionRecord session_seconds(const std::string& id, double start_s, double end_s) {
  SessionRecord s;
  s.session_id = id;
  s.participant_id = "p1";
  s.session_start = static_cast<Tick>(start_s * 4.0);
  s.session_end = static_cast<Tick>(end_s * 4.0);
  return s;
}

}  // namespace

TEST_CASE("collapse merges overlapping cross-behavior episodes into one run") {
  const auto s = session_seconds("s1", 0.0, 60.0);
  std::vector<RawAnnotation> anns = {ann("s1", Behavior::SIB, 1.0, 1.5),
                                     ann("s1", Behavior::ED, 1.25, 2.0),
                                     ann("s1", Behavior::ATO, 5.0, 5.0)};
  const auto onsets = collapse_episodes(anns, s);
  REQUIRE(onsets.size() == 2);
  CHECK(onsets[0] == 4);   // 1.0 s
  CHECK(onsets[1] == 20);  // 5.0 s
}

TEST_CASE("adjacent positive samples with no gap form one run") {
  const auto s = session_seconds("s1", 0.0, 60.0);
  // 1.0-1.5 s covers samples 4..6 and 1.75-2.0 s covers 7..8: consecutive.
  std::vector<RawAnnotation> anns = {ann("s1", Behavior::SIB, 1.0, 1.5),
                                     ann("s1", Behavior::SIB, 1.75, 2.0)};
  CHECK(collapse_episodes(anns, s) == std::vector<Tick>{4});
  // A 250 ms negative gap separates the runs.
  anns[1] = ann("s1", Behavior::SIB, 2.0, 2.25);
  CHECK(collapse_episodes(anns, s) == std::vector<Tick>({4, 8}));
}

TEST_CASE("single-sample episode emits its own timestamp") {
  const auto s = session_seconds("s1", 0.0, 60.0);
  std::vector<RawAnnotation> anns = {ann("s1", Behavior::ED, 3.0, 3.0)};
  CHECK(collapse_episodes(anns, s) == std::vector<Tick>{12});
  CHECK(collapse_episodes({}, s).empty());
}

TEST_CASE("annotations outside session bounds are rejected with the session id") {
  const auto s = session_seconds("s9", 10.0, 20.0);
  std::vector<RawAnnotation> anns = {ann("s9", Behavior::SIB, 5.0, 6.0)};
  CHECK_THROWS_WITH_AS(collapse_episodes(anns, s), doctest::Contains("s9"),
                       std::invalid_argument);
  std::vector<RawAnnotation> wrong = {ann("other", Behavior::SIB, 11.0, 12.0)};
  CHECK_THROWS_AS(collapse_episodes(wrong, s), std::invalid_argument);
}

TEST_CASE("collapse is idempotent on its own output") {
  rng::Stream stream(101);
  const auto s = session_seconds("s1", 0.0, 600.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<RawAnnotation> anns;
    const auto n = 1 + stream.uniform_index(20);
    for (std::size_t i = 0; i < n; ++i) {
      const auto start = stream.uniform_index(2300);
      const auto len = stream.uniform_index(12);
      anns.push_back(ann("s1", Behavior::SIB, 0, 0));
      anns.back().start = static_cast<Tick>(start);
      anns.back().stop = static_cast<Tick>(start + len);
    }
    const auto once = collapse_episodes(anns, s);
    std::vector<RawAnnotation> as_points;
    for (Tick t : once) {
      as_points.push_back(anns.front());
      as_points.back().start = as_points.back().stop = t;
    }
    CHECK(collapse_episodes(as_points, s) == once);
  }
}

TEST_CASE("collapse depends only on the positive-sample set") {
  rng::Stream stream(202);
  const auto s = session_seconds("s1", 0.0, 600.0);
  const Behavior classes[3] = {Behavior::SIB, Behavior::ED, Behavior::ATO};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<RawAnnotation> anns;
    const auto n = 1 + stream.uniform_index(15);
    for (std::size_t i = 0; i < n; ++i) {
      const auto start = stream.uniform_index(2300);
      const auto len = stream.uniform_index(10);
      auto a = ann("s1", classes[stream.uniform_index(3)], 0, 0);
      a.start = static_cast<Tick>(start);
      a.stop = static_cast<Tick>(start + len);
      anns.push_back(a);
    }
    const auto base = collapse_episodes(anns, s);

    // Relabeling behaviors, splitting spans, and shuffling leave the
    // superposed sample set unchanged.
    std::vector<RawAnnotation> reshaped;
    for (const auto& a : anns) {
      if (a.stop > a.start && stream.uniform() < 0.5) {
        const auto mid = a.start + static_cast<Tick>(stream.uniform_index(
                                       static_cast<std::uint64_t>(a.stop - a.start)));
        auto left = a, right = a;
        left.stop = mid;
        right.start = mid + 1;
        left.behavior = classes[stream.uniform_index(3)];
        reshaped.push_back(left);
        if (right.start <= right.stop) reshaped.push_back(right);
      } else {
        auto copy = a;
        copy.behavior = classes[stream.uniform_index(3)];
        reshaped.push_back(copy);
      }
    }
    std::reverse(reshaped.begin(), reshaped.end());
    CHECK(collapse_episodes(reshaped, s) == base);
  }
}

TEST_CASE("normalize converts to minutes since session start") {
  // Session 10:00-11:00 with onsets at 10:05 and 10:30.
  SessionRecord s;
  s.session_id = "s2";
  s.participant_id = "p1";
  s.session_start = 10 * 3600 * 4;
  s.session_end = 11 * 3600 * 4;
  const std::vector<Tick> real = {s.session_start + 5 * 60 * 4, s.session_start + 30 * 60 * 4};
  const auto seq = normalize_session(real, s);
  REQUIRE(seq.count() == 2);
  CHECK(seq.onsets()[0] == doctest::Approx(5.0));
  CHECK(seq.onsets()[1] == doctest::Approx(30.0));
  CHECK(seq.duration() == doctest::Approx(60.0));
}

TEST_CASE("normalize keeps empty short sessions and boundary onsets") {
  // 4.98-minute session (1195 grid samples) with no onsets.
  SessionRecord s;
  s.session_id = "1244.01-1";
  s.participant_id = "1244.01";
  s.session_start = 1000;
  s.session_end = 1000 + 1195;
  const auto empty = normalize_session({}, s);
  CHECK(empty.count() == 0);
  CHECK(empty.duration() == doctest::Approx(4.98).epsilon(1e-3));

  // Onset exactly at session start stays at 0.0; one at session end drops.
  const std::vector<Tick> edges = {s.session_start, s.session_end};
  const auto seq = normalize_session(edges, s);
  REQUIRE(seq.count() == 1);
  CHECK(seq.onsets()[0] == 0.0);
}

TEST_CASE("normalize dedupes and preserves gaps exactly") {
  SessionRecord s;
  s.session_id = "s3";
  s.participant_id = "p";
  s.session_start = 0;
  s.session_end = 240 * 100;
  std::size_t dedup = 0;
  const std::vector<Tick> onsets = {480, 480, 720, 1200};
  const auto seq = normalize_session(onsets, s, &dedup);
  CHECK(dedup == 1);
  REQUIRE(seq.count() == 3);
  // Gap preservation up to the unit conversion.
  CHECK(seq.onsets()[1] - seq.onsets()[0] == doctest::Approx((720 - 480) / 240.0));
  CHECK(seq.onsets()[2] - seq.onsets()[1] == doctest::Approx((1200 - 720) / 240.0));
}

TEST_CASE("EventSequence enforces its invariants") {
  CHECK_THROWS_AS(EventSequence("x", {1.0, 1.0}, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence("x", {2.0, 1.0}, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence("x", {-1.0}, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(EventSequence("x", {10.0}, 10.0), std::invalid_argument);  // t >= T
  CHECK_THROWS_AS(EventSequence("x", {}, 0.0), std::invalid_argument);
  const EventSequence ok("x", {0.0, 5.0}, 10.0);
  CHECK(ok.history_before(5.0).size() == 1);
  CHECK(ok.history_through(5.0).size() == 2);
}

TEST_CASE("validate_dataset flags violations without throwing") {
  Dataset ds;
  ds.sequences.push_back(EventSequence("a", {1.0, 2.0}, 10.0));
  ds.sequences.push_back(EventSequence::unchecked("b", {3.0, 2.0}, 10.0));
  ds.sequences.push_back(EventSequence::unchecked("b", {1.0, 1.0}, 10.0));
  const auto report = validate_dataset(ds);
  CHECK_FALSE(report.ok());
  CHECK(report.violations.size() == 3);

  Dataset good;
  good.sequences.push_back(EventSequence("a", {1.0}, 10.0));
  good.sequences.push_back(EventSequence("b", {}, 5.0));
  CHECK(validate_dataset(good).ok());
}

namespace {

// Per-participant (onsets, sessions, total minutes) rows of the observed
// cohort summary used as a layout reference.
struct CohortRow {
  int onsets;
  int sessions;
  double minutes;
};

const CohortRow kCohort[] = {
    {1287, 24, 2000.08}, {741, 7, 528.88},   {481, 7, 629.65},  {407, 17, 940.49},
    {195, 7, 434.00},    {150, 16, 1052.95}, {140, 9, 931.94},  {118, 3, 262.33},
    {98, 8, 376.91},     {94, 16, 719.15},   {79, 5, 339.70},   {79, 7, 211.61},
    {77, 25, 2263.22},   {65, 3, 253.31},    {64, 20, 746.63},  {57, 4, 386.73},
    {55, 6, 740.04},     {55, 4, 177.53},    {54, 5, 203.55},   {50, 20, 1597.28},
    {44, 5, 446.34},     {42, 7, 377.38},    {38, 11, 949.90},  {37, 13, 987.37},
    {33, 7, 550.03},     {33, 9, 1088.57},   {28, 4, 164.43},   {26, 13, 792.47},
    {22, 5, 558.22},     {22, 9, 330.09},    {21, 6, 267.56},   {21, 8, 657.87},
    {19, 3, 204.75},     {19, 4, 296.57},    {14, 7, 772.40},   {13, 7, 516.60},
    {12, 6, 384.54},     {10, 6, 256.91},    {9, 1, 77.82},     {9, 18, 908.44},
    {9, 6, 278.54},      {8, 5, 686.19},     {6, 10, 644.56},   {6, 6, 252.44},
    {5, 5, 241.64},      {5, 1, 75.77},      {4, 1, 71.95},     {3, 1, 22.32},
    {2, 2, 129.08},      {2, 3, 196.33},     {1, 2, 103.88},    {1, 2, 80.94},
    {1, 6, 762.71},      {0, 1, 4.98},       {0, 1, 112.40},    {0, 1, 64.95},
    {0, 1, 49.75},       {0, 1, 66.48},      {0, 1, 40.00},     {0, 1, 26.78},
    {0, 1, 46.63},       {0, 1, 73.85},      {0, 1, 27.18},     {0, 1, 71.05},
    {0, 1, 45.85},       {0, 1, 79.50},      {0, 1, 39.83},     {0, 1, 67.88},
    {0, 1, 21.15},       {0, 1, 57.98}};

}  // namespace

TEST_CASE("validation summary reproduces the cohort reference means") {
  Dataset ds;
  int pid = 0;
  for (const auto& row : kCohort) {
    const std::string participant = "P" + std::to_string(pid++);
    const double per_session = row.minutes / row.sessions;
    for (int s = 0; s < row.sessions; ++s) {
      std::vector<double> onsets;
      if (s == 0) {
        for (int j = 0; j < row.onsets; ++j)
          onsets.push_back(per_session * (j + 1.0) / (row.onsets + 1.0));
      }
      const std::string sid = participant + "-" + std::to_string(s);
      ds.sequences.push_back(EventSequence(sid, std::move(onsets), per_session));
      ds.metadata["participant:" + sid] = participant;
    }
  }
  const auto report = validate_dataset(ds);
  CHECK(report.ok());
  CHECK(report.n_sequences == 429);
  CHECK(report.rows.size() == 70);
  CHECK(report.onsets_summary.mean == doctest::Approx(69.59).epsilon(1e-4));
  CHECK(report.sessions_summary.mean == doctest::Approx(6.13).epsilon(1e-3));
  CHECK(report.minutes_summary.mean == doctest::Approx(426.10).epsilon(1e-4));
  CHECK(report.minutes_per_session_summary.mean == doctest::Approx(65.84).epsilon(1e-4));
  CHECK(report.sessions_summary.median == doctest::Approx(5.0));
  CHECK(report.minutes_summary.median == doctest::Approx(264.945).epsilon(1e-4));
}

TEST_CASE("dataset jsonl round-trips byte-identically") {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.sequences.push_back(EventSequence("a", {0.004166667, 5.5, 30.25}, 60.0));
  ds.sequences.push_back(EventSequence("b", {}, 4.98));
  ds.metadata["dedup_count"] = "0";

  const auto dir = fs::temp_directory_path() / "tpplab_core_test";
  fs::create_directories(dir);
  const auto p1 = dir / "ds1.jsonl";
  const auto p2 = dir / "ds2.jsonl";
  io::write_dataset_jsonl(ds, p1);
  const auto back = io::read_dataset_jsonl(p1);
  REQUIRE(back.sequences.size() == 2);
  CHECK(back.sequences[0].count() == 3);
  CHECK(back.metadata.at("dedup_count") == "0");
  io::write_dataset_jsonl(back, p2);
  CHECK(io::read_text_file(p1) == io::read_text_file(p2));
  fs::remove_all(dir);
}

TEST_CASE("timestamp parsing handles ISO-8601 and epoch seconds on the grid") {
  const Tick iso =
      io::parse_timestamp("2020-03-02T10:00:00.250", io::TimeEncoding::Iso8601, false);
  const Tick iso_sp =
      io::parse_timestamp("2020-03-02 10:00:00.250", io::TimeEncoding::Iso8601, false);
  CHECK(iso == iso_sp);
  CHECK(iso % 4 == 1);  // 250 ms past a whole second
  CHECK(io::detect_encoding("2020-03-02T10:00:00") == io::TimeEncoding::Iso8601);
  CHECK(io::detect_encoding("1583143200.25") == io::TimeEncoding::EpochSeconds);
  CHECK(io::parse_timestamp("1583143200.25", io::TimeEncoding::EpochSeconds, false) ==
        1583143200LL * 4 + 1);
  // Off-grid rejection and tolerated rounding.
  CHECK_THROWS_AS(io::parse_timestamp("1583143200.1", io::TimeEncoding::EpochSeconds, false),
                  io::InputError);
  CHECK(io::parse_timestamp("1583143200.1", io::TimeEncoding::EpochSeconds, true) ==
        1583143200LL * 4);
}
