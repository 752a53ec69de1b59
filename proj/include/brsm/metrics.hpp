#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "brsm/linalg.hpp"

namespace brsm {

// h2(p) in bits, with 0 log 0 = 0.
double binary_entropy(double p);

// Sum of per-cell binary entropies of the duty cycles.
double layer_entropy(const Vector& duty);

// Theoretical maximum for a layer with sparseness k/(m n): every cell at the
// expected duty cycle.
double max_entropy(int winners, int groups, int cells_per_group);

// exp of the mean negative log-probability. Inputs are natural-log
// probabilities, each <= 0 and finite.
double perplexity(const std::vector<double>& log_probs);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct MetricRecord {
    long step = 0;
    std::string run_id;
    std::string config_hash;
    double wall_time = 0.0;  // seconds since epoch
    std::map<std::string, double> values;

    std::string to_json_line() const;
    static MetricRecord from_json_line(const std::string& line);
};

// Newline-delimited records, one file per run; the filename embeds the run
// identifier and config hash. Steps must be strictly increasing.
class MetricWriter {
  public:
    MetricWriter(const std::string& dir, const std::string& run_id,
                 const std::string& config_hash, const std::string& header_text,
                 int flush_every = 1);

    const std::string& path() const { return path_; }

    void emit(long step, const std::map<std::string, double>& values);
    void flush();

  private:
    std::string path_;
    std::string run_id_;
    std::string config_hash_;
    std::ofstream out_;
    long last_step_ = -1;
    int flush_every_ = 1;
    int since_flush_ = 0;
};

// All metric records from a run file, skipping the header line.
std::vector<MetricRecord> read_metric_file(const std::string& path);

// True when both runs produced identical metric values step by step,
// ignoring wall-clock timestamps.
bool metrics_equal_ignoring_time(const std::vector<MetricRecord>& a,
                                 const std::vector<MetricRecord>& b);

}  // namespace brsm
