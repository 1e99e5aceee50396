#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aggc/clipper.hpp"
#include "aggc/scale.hpp"

namespace aggc {

// One row of per-step, per-group telemetry. `loss` is run-level (the step's
// training loss, if the workload has one) and repeats on every group row of
// that step.
struct StepRecord {
    std::string run_id;
    std::int64_t step = 0;
    std::string group_id;
    double pre_norm = 0.0;
    double post_norm = 0.0;
    double ema_scale = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double alpha_low = 0.0;
    double alpha_high = 0.0;
    double scale_factor = 1.0;
    ClipAction action = ClipAction::kNone;
    std::optional<double> loss;

    bool operator==(const StepRecord&) const = default;
};

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);

inline constexpr std::string_view kCsvHeader =
    "run_id,step,group_id,pre_norm,post_norm,ema_scale,lower,upper,alpha_low,alpha_high,"
    "scale_factor,action,loss";

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void record(const StepRecord& record) = 0;
    virtual void flush() = 0;
};

class CsvSink final : public RecordSink {
public:
    explicit CsvSink(const std::filesystem::path& path, int flush_interval = 64);
    void record(const StepRecord& record) override;
    void flush() override;

private:
    std::ofstream out_;
    std::filesystem::path path_;
    int flush_interval_;
    int pending_ = 0;
};

class JsonlSink final : public RecordSink {
public:
    explicit JsonlSink(const std::filesystem::path& path, int flush_interval = 64);
    void record(const StepRecord& record) override;
    void flush() override;

private:
    std::ofstream out_;
    std::filesystem::path path_;
    int flush_interval_;
    int pending_ = 0;
};

std::vector<StepRecord> read_csv_records(const std::filesystem::path& path);
std::vector<StepRecord> read_jsonl_records(const std::filesystem::path& path);

struct GroupSummary {
    std::string group_id;
    std::int64_t steps = 0;
    double clip_frequency = 0.0;   // clipped_high events / steps
    double boost_frequency = 0.0;  // boosted_low events / steps
    double mean_pre_norm = 0.0;
    double max_pre_norm = 0.0;
    double final_ema_scale = 0.0;
};

struct RunSummary {
    std::string run_id;
    std::int64_t steps = 0;
    std::vector<GroupSummary> groups;
    std::optional<double> initial_loss;
    std::optional<double> final_loss;
};

// Pure aggregation over records in step order. Throws EmptyInputError when
// there is nothing to summarize.
RunSummary summarize(const std::vector<StepRecord>& records);

void write_summary(const std::filesystem::path& path, const RunSummary& summary);

// Serializable clipper state: beta, per-group EMA scales and initialized
// flags, and the last completed step, as one JSON document.
struct ClipperSnapshot {
    double beta = 0.95;
    std::optional<std::int64_t> step;
    struct GroupState {
        std::string group_id;
        double scale = 0.0;
        bool initialized = false;
    };
    std::vector<GroupState> groups;
};

ClipperSnapshot snapshot_of(const AggcClipper& clipper);
void apply_snapshot(AggcClipper& clipper, const ClipperSnapshot& snapshot);

void write_clipper_snapshot(const std::filesystem::path& path, const ClipperSnapshot& snapshot);
ClipperSnapshot read_clipper_snapshot(const std::filesystem::path& path);

}  // namespace aggc
