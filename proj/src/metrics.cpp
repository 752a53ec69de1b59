#include "brsm/metrics.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include <json.hpp>

namespace brsm {

double binary_entropy(double p) {
    require(p >= 0.0 && p <= 1.0, "binary_entropy: p must lie in [0, 1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

double layer_entropy(const Vector& duty) {
    double total = 0.0;
    for (double d : duty) {
        require(d >= 0.0 && d <= 1.0, "layer_entropy: duty cycles must lie in [0, 1]");
        total += binary_entropy(d);
    }
    return total;
}

double max_entropy(int winners, int groups, int cells_per_group) {
    const long cells = static_cast<long>(groups) * cells_per_group;
    require(cells >= 1 && winners >= 1 && winners <= cells, "max_entropy: invalid sparseness");
    const double s = static_cast<double>(winners) / static_cast<double>(cells);
    return static_cast<double>(cells) * binary_entropy(s);
}

double perplexity(const std::vector<double>& log_probs) {
    require(!log_probs.empty(), "perplexity: no observations");
    double total = 0.0;
    for (double lp : log_probs) {
        require(std::isfinite(lp) && lp <= 0.0,
                "perplexity: log-probabilities must be finite and <= 0");
        total += lp;
    }
    return std::exp(-total / static_cast<double>(log_probs.size()));
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    require_dim(predicted.size() == truth.size(), "accuracy: length mismatch");
    require(!predicted.empty(), "accuracy: no observations");
    long correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

std::string MetricRecord::to_json_line() const {
    nlohmann::json j;
    j["kind"] = "metric";
    j["step"] = step;
    j["run_id"] = run_id;
    j["config_hash"] = config_hash;
    j["wall_time"] = wall_time;
    j["values"] = values;
    return j.dump();
}

MetricRecord MetricRecord::from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("metric record: ") + e.what());
    }
    MetricRecord r;
    r.step = j.at("step").get<long>();
    r.run_id = j.at("run_id").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.wall_time = j.at("wall_time").get<double>();
    for (auto it = j.at("values").begin(); it != j.at("values").end(); ++it)
        r.values[it.key()] = it.value().get<double>();
    return r;
}

MetricWriter::MetricWriter(const std::string& dir, const std::string& run_id,
                           const std::string& config_hash, const std::string& header_text,
                           int flush_every)
    : run_id_(run_id), config_hash_(config_hash), flush_every_(flush_every) {
    require(flush_every >= 1, "MetricWriter: flush cadence must be >= 1");
    std::filesystem::create_directories(dir);
    path_ = (std::filesystem::path(dir) / (run_id + "-" + config_hash + ".jsonl")).string();
    out_.open(path_, std::ios::trunc);
    if (!out_) throw IoError("MetricWriter: cannot open " + path_);
    nlohmann::json header;
    header["kind"] = "header";
    header["run_id"] = run_id;
    header["config_hash"] = config_hash;
    header["config"] = header_text;
    out_ << header.dump() << '\n';
    out_.flush();
}

void MetricWriter::emit(long step, const std::map<std::string, double>& values) {
    if (step <= last_step_)
        throw Error("MetricWriter: step " + std::to_string(step) +
                    " is not after step " + std::to_string(last_step_));
    MetricRecord r;
    r.step = step;
    r.run_id = run_id_;
    r.config_hash = config_hash_;
    r.wall_time = std::chrono::duration<double>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
    r.values = values;
    out_ << r.to_json_line() << '\n';
    if (!out_) throw IoError("MetricWriter: write failed on " + path_);
    last_step_ = step;
    if (++since_flush_ >= flush_every_) flush();
}

void MetricWriter::flush() {
    out_.flush();
    since_flush_ = 0;
}

std::vector<MetricRecord> read_metric_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::vector<MetricRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("kind", "") != "metric") continue;
        records.push_back(MetricRecord::from_json_line(line));
    }
    return records;
}

bool metrics_equal_ignoring_time(const std::vector<MetricRecord>& a,
                                 const std::vector<MetricRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].step != b[i].step) return false;
        if (a[i].values.size() != b[i].values.size()) return false;
        auto it_a = a[i].values.begin();
        auto it_b = b[i].values.begin();
        for (; it_a != a[i].values.end(); ++it_a, ++it_b) {
            if (it_a->first != it_b->first) return false;
            const double va = it_a->second, vb = it_b->second;
            if (!(va == vb || (std::isnan(va) && std::isnan(vb)))) return false;
        }
    }
    return true;
}

}  // namespace brsm
