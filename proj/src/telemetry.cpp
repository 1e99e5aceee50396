#include "aggc/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aggc/error.hpp"

namespace aggc {

std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc{} || result.ptr != text.data() + text.size())
        throw IoError("malformed number '" + std::string(text) + "'");
    return value;
}

namespace {

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (const char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                in_quotes = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_row(const StepRecord& r) {
    std::string row;
    row += csv_field(r.run_id);
    row += ',';
    row += std::to_string(r.step);
    row += ',';
    row += csv_field(r.group_id);
    for (const double value : {r.pre_norm, r.post_norm, r.ema_scale, r.lower, r.upper,
                               r.alpha_low, r.alpha_high, r.scale_factor}) {
        row += ',';
        row += format_double(value);
    }
    row += ',';
    row += to_string(r.action);
    row += ',';
    if (r.loss) row += format_double(*r.loss);
    row += '\n';
    return row;
}

nlohmann::ordered_json jsonl_object(const StepRecord& r) {
    nlohmann::ordered_json object;
    object["run_id"] = r.run_id;
    object["step"] = r.step;
    object["group_id"] = r.group_id;
    object["pre_norm"] = r.pre_norm;
    object["post_norm"] = r.post_norm;
    object["ema_scale"] = r.ema_scale;
    object["lower"] = r.lower;
    object["upper"] = r.upper;
    object["alpha_low"] = r.alpha_low;
    object["alpha_high"] = r.alpha_high;
    object["scale_factor"] = r.scale_factor;
    object["action"] = std::string(to_string(r.action));
    if (r.loss) object["loss"] = *r.loss;
    else object["loss"] = nullptr;
    return object;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace

CsvSink::CsvSink(const std::filesystem::path& path, int flush_interval)
    : out_(open_for_write(path)), path_(path), flush_interval_(std::max(flush_interval, 1)) {
    out_ << kCsvHeader << '\n';
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
}

void CsvSink::record(const StepRecord& record) {
    out_ << csv_row(record);
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
    if (++pending_ >= flush_interval_) flush();
}

void CsvSink::flush() {
    out_.flush();
    if (!out_) throw IoError("flush failed on '" + path_.string() + "'");
    pending_ = 0;
}

JsonlSink::JsonlSink(const std::filesystem::path& path, int flush_interval)
    : out_(open_for_write(path)), path_(path), flush_interval_(std::max(flush_interval, 1)) {}

void JsonlSink::record(const StepRecord& record) {
    out_ << jsonl_object(record).dump() << '\n';
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
    if (++pending_ >= flush_interval_) flush();
}

void JsonlSink::flush() {
    out_.flush();
    if (!out_) throw IoError("flush failed on '" + path_.string() + "'");
    pending_ = 0;
}

std::vector<StepRecord> read_csv_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path.string() + "' is empty");
    if (line != kCsvHeader) throw IoError("'" + path.string() + "' has an unexpected header");

    std::vector<StepRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 13)
            throw IoError("'" + path.string() + "': malformed row '" + line + "'");
        StepRecord r;
        r.run_id = fields[0];
        r.step = static_cast<std::int64_t>(std::stoll(fields[1]));
        r.group_id = fields[2];
        r.pre_norm = parse_double(fields[3]);
        r.post_norm = parse_double(fields[4]);
        r.ema_scale = parse_double(fields[5]);
        r.lower = parse_double(fields[6]);
        r.upper = parse_double(fields[7]);
        r.alpha_low = parse_double(fields[8]);
        r.alpha_high = parse_double(fields[9]);
        r.scale_factor = parse_double(fields[10]);
        r.action = clip_action_from_string(fields[11]);
        if (!fields[12].empty()) r.loss = parse_double(fields[12]);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<StepRecord> read_jsonl_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<StepRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto object = nlohmann::json::parse(line, nullptr, false);
        if (object.is_discarded())
            throw IoError("'" + path.string() + "': malformed JSONL line");
        StepRecord r;
        r.run_id = object.at("run_id").get<std::string>();
        r.step = object.at("step").get<std::int64_t>();
        r.group_id = object.at("group_id").get<std::string>();
        r.pre_norm = object.at("pre_norm").get<double>();
        r.post_norm = object.at("post_norm").get<double>();
        r.ema_scale = object.at("ema_scale").get<double>();
        r.lower = object.at("lower").get<double>();
        r.upper = object.at("upper").get<double>();
        r.alpha_low = object.at("alpha_low").get<double>();
        r.alpha_high = object.at("alpha_high").get<double>();
        r.scale_factor = object.at("scale_factor").get<double>();
        r.action = clip_action_from_string(object.at("action").get<std::string>());
        if (!object.at("loss").is_null()) r.loss = object.at("loss").get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

RunSummary summarize(const std::vector<StepRecord>& records) {
    if (records.empty()) throw EmptyInputError("summarize: no records");

    RunSummary summary;
    summary.run_id = records.front().run_id;

    std::vector<std::string> group_order;
    std::map<std::string, GroupSummary> by_group;
    std::int64_t max_step = 0;
    for (const auto& r : records) {
        auto [it, inserted] = by_group.try_emplace(r.group_id);
        auto& g = it->second;
        if (inserted) {
            g.group_id = r.group_id;
            group_order.push_back(r.group_id);
        }
        ++g.steps;
        if (r.action == ClipAction::kClippedHigh) g.clip_frequency += 1.0;
        if (r.action == ClipAction::kBoostedLow) g.boost_frequency += 1.0;
        g.mean_pre_norm += r.pre_norm;
        g.max_pre_norm = std::max(g.max_pre_norm, r.pre_norm);
        g.final_ema_scale = r.ema_scale;
        max_step = std::max(max_step, r.step);
        if (r.loss) {
            if (!summary.initial_loss) summary.initial_loss = r.loss;
            summary.final_loss = r.loss;
        }
    }
    summary.steps = max_step + 1;
    for (const auto& id : group_order) {
        auto g = by_group.at(id);
        g.clip_frequency /= static_cast<double>(g.steps);
        g.boost_frequency /= static_cast<double>(g.steps);
        g.mean_pre_norm /= static_cast<double>(g.steps);
        summary.groups.push_back(std::move(g));
    }
    return summary;
}

void write_summary(const std::filesystem::path& path, const RunSummary& summary) {
    nlohmann::ordered_json object;
    object["run_id"] = summary.run_id;
    object["steps"] = summary.steps;
    object["initial_loss"] =
        summary.initial_loss ? nlohmann::json(*summary.initial_loss) : nlohmann::json(nullptr);
    object["final_loss"] =
        summary.final_loss ? nlohmann::json(*summary.final_loss) : nlohmann::json(nullptr);
    object["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : summary.groups) {
        nlohmann::ordered_json entry;
        entry["group_id"] = g.group_id;
        entry["steps"] = g.steps;
        entry["clip_frequency"] = g.clip_frequency;
        entry["boost_frequency"] = g.boost_frequency;
        entry["mean_pre_norm"] = g.mean_pre_norm;
        entry["max_pre_norm"] = g.max_pre_norm;
        entry["final_ema_scale"] = g.final_ema_scale;
        object["groups"].push_back(std::move(entry));
    }
    auto out = open_for_write(path);
    out << object.dump(2) << '\n';
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

ClipperSnapshot snapshot_of(const AggcClipper& clipper) {
    ClipperSnapshot snapshot;
    snapshot.beta = clipper.config().beta;
    snapshot.step = clipper.last_step();
    const auto& ema = clipper.ema();
    for (Eigen::Index j = 0; j < ema.group_count(); ++j) {
        snapshot.groups.push_back({ema.group_ids()[static_cast<std::size_t>(j)], ema.scale(j),
                                   ema.is_initialized(j)});
    }
    return snapshot;
}

void apply_snapshot(AggcClipper& clipper, const ClipperSnapshot& snapshot) {
    const auto& ema = clipper.ema();
    if (snapshot.beta != clipper.config().beta)
        throw ConfigError("snapshot: beta does not match the clipper config");
    if (static_cast<Eigen::Index>(snapshot.groups.size()) != ema.group_count())
        throw ConfigError("snapshot: group count does not match the partition");
    for (Eigen::Index j = 0; j < ema.group_count(); ++j) {
        const auto& g = snapshot.groups[static_cast<std::size_t>(j)];
        if (g.group_id != ema.group_ids()[static_cast<std::size_t>(j)])
            throw ConfigError("snapshot: group '" + g.group_id + "' does not match the partition");
        clipper.restore_group(j, g.scale, g.initialized);
    }
    clipper.restore_step(snapshot.step);
}

void write_clipper_snapshot(const std::filesystem::path& path, const ClipperSnapshot& snapshot) {
    nlohmann::ordered_json object;
    object["beta"] = snapshot.beta;
    object["step"] = snapshot.step ? nlohmann::json(*snapshot.step) : nlohmann::json(nullptr);
    object["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : snapshot.groups) {
        nlohmann::ordered_json entry;
        entry["group_id"] = g.group_id;
        entry["scale"] = g.scale;
        entry["initialized"] = g.initialized;
        object["groups"].push_back(std::move(entry));
    }
    auto out = open_for_write(path);
    out << object.dump(2) << '\n';
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

ClipperSnapshot read_clipper_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    nlohmann::json object;
    try {
        in >> object;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
    ClipperSnapshot snapshot;
    snapshot.beta = object.at("beta").get<double>();
    if (!object.at("step").is_null()) snapshot.step = object.at("step").get<std::int64_t>();
    for (const auto& entry : object.at("groups")) {
        snapshot.groups.push_back({entry.at("group_id").get<std::string>(),
                                   entry.at("scale").get<double>(),
                                   entry.at("initialized").get<bool>()});
    }
    return snapshot;
}

}  // namespace aggc
