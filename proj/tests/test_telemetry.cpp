#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "aggc/telemetry.hpp"
#include "support/oracles.hpp"
#include "support/views.hpp"

using namespace aggc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "aggc_telemetry_test";
    fs::create_directories(dir);
    return dir;
}

std::vector<StepRecord> synthetic_records(int steps, int groups, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<StepRecord> records;
    for (int t = 0; t < steps; ++t) {
        for (int g = 0; g < groups; ++g) {
            StepRecord r;
            r.run_id = "run";
            r.step = t;
            r.group_id = "group" + std::to_string(g);
            r.pre_norm = std::exp(6.0 * (unit(rng) - 0.5));
            r.ema_scale = unit(rng) * 4.0;
            r.lower = 0.5 * r.ema_scale;
            r.upper = 2.0 * r.ema_scale;
            r.alpha_low = 0.5;
            r.alpha_high = 2.0;
            if (r.pre_norm > r.upper) {
                r.action = ClipAction::kClippedHigh;
                r.scale_factor = r.upper / (r.pre_norm + 1e-6);
            } else if (r.pre_norm < r.lower) {
                r.action = ClipAction::kBoostedLow;
                r.scale_factor = r.lower / (r.pre_norm + 1e-6);
            }
            r.post_norm = r.pre_norm * r.scale_factor;
            if (g == 0 && t % 3 == 0) r.loss = 3.0 / (1.0 + t);
            records.push_back(std::move(r));
        }
    }
    return records;
}

}  // namespace

TEST_CASE("format_double: shortest round-trip representation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const double value = unit(rng) * std::pow(10.0, (i % 61) - 30);
        CHECK(parse_double(format_double(value)) == value);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(parse_double(format_double(4.0 / (8.0 + 1e-6))) == 4.0 / (8.0 + 1e-6));
}

TEST_CASE("csv sink: header and cardinality") {
    const auto path = temp_dir() / "cardinality.csv";
    {
        CsvSink sink(path, 5);
        for (const auto& r : synthetic_records(10, 3, 1)) sink.record(r);
        sink.flush();
    }
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == kCsvHeader);
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 30);
}

TEST_CASE("csv sink: parse-back equals the in-memory records") {
    const auto path = temp_dir() / "roundtrip.csv";
    const auto records = synthetic_records(25, 4, 2);
    {
        CsvSink sink(path);
        for (const auto& r : records) sink.record(r);
        sink.flush();
    }
    const auto parsed = read_csv_records(path);
    REQUIRE(parsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(parsed[i] == records[i]);
}

TEST_CASE("jsonl sink: one line per record, parse-back exact, null loss") {
    const auto path = temp_dir() / "roundtrip.jsonl";
    const auto records = synthetic_records(25, 4, 3);
    {
        JsonlSink sink(path);
        for (const auto& r : records) sink.record(r);
        sink.flush();
    }
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    bool saw_null_loss = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines;
        if (line.find("\"loss\":null") != std::string::npos) saw_null_loss = true;
    }
    CHECK(lines == static_cast<int>(records.size()));
    CHECK(saw_null_loss);

    const auto parsed = read_jsonl_records(path);
    REQUIRE(parsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(parsed[i] == records[i]);
}

TEST_CASE("csv fields containing delimiters survive the round trip") {
    const auto path = temp_dir() / "quoting.csv";
    StepRecord r;
    r.run_id = "run,with\"quotes";
    r.group_id = "odd,group";
    {
        CsvSink sink(path);
        sink.record(r);
        sink.flush();
    }
    const auto parsed = read_csv_records(path);
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].run_id == r.run_id);
    CHECK(parsed[0].group_id == r.group_id);
}

TEST_CASE("summarize: all-none records have zero frequencies") {
    std::vector<StepRecord> records;
    for (int t = 0; t < 20; ++t) {
        StepRecord r;
        r.run_id = "run";
        r.step = t;
        r.group_id = "g";
        r.pre_norm = 1.0;
        r.post_norm = 1.0;
        records.push_back(r);
    }
    const auto summary = summarize(records);
    REQUIRE(summary.groups.size() == 1);
    CHECK(summary.groups[0].clip_frequency == 0.0);
    CHECK(summary.groups[0].boost_frequency == 0.0);
    CHECK(summary.steps == 20);
}

TEST_CASE("summarize: counted clip events give the exact frequency") {
    std::vector<StepRecord> records;
    for (int t = 0; t < 100; ++t) {
        StepRecord r;
        r.run_id = "run";
        r.step = t;
        r.group_id = "g";
        r.pre_norm = 1.0;
        if (t % 20 == 0) {  // exactly 5 events
            r.action = ClipAction::kClippedHigh;
            r.scale_factor = 0.5;
        }
        records.push_back(r);
    }
    const auto summary = summarize(records);
    CHECK(summary.groups[0].clip_frequency == 0.05);
}

TEST_CASE("summarize: max pre-norm picks up the spike, losses bracket the run") {
    auto records = synthetic_records(50, 2, 4);
    records[40].pre_norm = 1234.5;
    const auto summary = summarize(records);
    double max_norm = 0.0;
    for (const auto& g : summary.groups) max_norm = std::max(max_norm, g.max_pre_norm);
    CHECK(max_norm == 1234.5);
    REQUIRE(summary.initial_loss.has_value());
    REQUIRE(summary.final_loss.has_value());
    CHECK(*summary.initial_loss == 3.0);
    CHECK(*summary.final_loss < *summary.initial_loss);
}

TEST_CASE("summarize: empty input is an error") {
    CHECK_THROWS_AS(summarize({}), EmptyInputError);
}

TEST_CASE("clipper snapshot: round-trips through disk and resumes identically") {
    using testing::OwnedGroup;
    std::mt19937_64 rng(9);
    std::vector<OwnedGroup> groups;
    groups.push_back({"a", {oracle::random_vector(rng, 16)}});
    groups.push_back({"b", {oracle::random_vector(rng, 16)}});
    const auto partition = testing::partition_of(groups);

    AggcClipper original(AggcConfig{}, partition);
    for (int t = 0; t < 30; ++t) {
        for (auto& group : groups) group.buffers[0] = oracle::random_vector(rng, 16, 1.0 + t % 5);
        auto views = testing::views_of(groups);
        original.step(std::span<GradientView>(views), StepContext(t, 60));
    }

    const auto path = temp_dir() / "clipper_state.json";
    write_clipper_snapshot(path, snapshot_of(original));
    const auto loaded = read_clipper_snapshot(path);

    AggcClipper resumed(AggcConfig{}, partition);
    apply_snapshot(resumed, loaded);
    CHECK(resumed.last_step() == original.last_step());
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(resumed.ema().scale(j) == original.ema().scale(j));

    // Both clippers continue bit-identically.
    for (int t = 30; t < 40; ++t) {
        for (auto& group : groups) group.buffers[0] = oracle::random_vector(rng, 16);
        auto views_a = testing::views_of(groups);
        auto copies = groups;
        auto views_b = testing::views_of(copies);
        const auto da = original.step(std::span<GradientView>(views_a), StepContext(t, 60));
        const auto db = resumed.step(std::span<GradientView>(views_b), StepContext(t, 60));
        for (std::size_t j = 0; j < da.size(); ++j) {
            CHECK(da[j].scale_factor == db[j].scale_factor);
            CHECK(da[j].interval.upper == db[j].interval.upper);
        }
    }
}

TEST_CASE("clipper snapshot: mismatches rejected") {
    using testing::OwnedGroup;
    std::vector<OwnedGroup> groups;
    groups.push_back({"a", {Eigen::VectorXd::Ones(4)}});
    const auto partition = testing::partition_of(groups);
    AggcClipper clipper(AggcConfig{}, partition);

    auto snapshot = snapshot_of(clipper);
    snapshot.beta = 0.5;
    CHECK_THROWS_AS(apply_snapshot(clipper, snapshot), ConfigError);

    snapshot = snapshot_of(clipper);
    snapshot.groups[0].group_id = "other";
    CHECK_THROWS_AS(apply_snapshot(clipper, snapshot), ConfigError);

    snapshot = snapshot_of(clipper);
    snapshot.groups.push_back({"extra", 1.0, true});
    CHECK_THROWS_AS(apply_snapshot(clipper, snapshot), ConfigError);
}

TEST_CASE("sinks: unwritable path raises IoError") {
    // A regular file as a directory component cannot be opened through.
    const auto blocker = temp_dir() / "blocker";
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(CsvSink(blocker / "y.csv"), IoError);
    CHECK_THROWS_AS(read_csv_records(temp_dir() / "missing.csv"), IoError);
}
