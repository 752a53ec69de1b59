#include "brsm/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace brsm {

void GrammarSpec::validate() const {
    require(!rows.empty(), "GrammarSpec: needs at least one sub-sequence");
    require(alphabet >= 1, "GrammarSpec: alphabet must be positive");
    const std::size_t n = rows[0].size();
    require(n >= 1, "GrammarSpec: sub-sequences must be non-empty");
    for (const auto& row : rows) {
        require(row.size() == n, "GrammarSpec: sub-sequences must share one length");
        for (int label : row)
            require(label >= 0 && label < alphabet, "GrammarSpec: label outside the alphabet");
    }
}

std::string GrammarSpec::to_text() const {
    std::ostringstream os;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ", ";
            os << row[i];
        }
        os << '\n';
    }
    return os.str();
}

GrammarSpec GrammarSpec::from_text(const std::string& text) {
    GrammarSpec g;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        // Commas become spaces; blank lines are skipped.
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<int> row;
        int label;
        while (ls >> label) row.push_back(label);
        if (!ls.eof()) {
            ls.clear();
            std::string tail;
            if (ls >> tail) throw ParseError("GrammarSpec: unparseable label in line: " + line);
        }
        if (!row.empty()) g.rows.push_back(std::move(row));
    }
    if (g.rows.empty()) throw ParseError("GrammarSpec: no sub-sequences found");
    int max_label = 0;
    for (const auto& row : g.rows)
        for (int label : row) {
            if (label < 0) throw ParseError("GrammarSpec: negative label");
            max_label = std::max(max_label, label);
        }
    g.alphabet = std::max(10, max_label + 1);
    g.validate();
    return g;
}

GrammarSpec GrammarSpec::builtin_8x9() {
    GrammarSpec g;
    g.rows = {
        {2, 4, 0, 7, 8, 1, 6, 1, 8},
        {2, 7, 4, 9, 5, 9, 3, 1, 0},
        {5, 7, 3, 4, 1, 3, 1, 6, 4},
        {1, 3, 7, 5, 2, 5, 5, 3, 4},
        {2, 9, 1, 9, 2, 8, 3, 2, 7},
        {1, 2, 6, 4, 8, 3, 5, 0, 3},
        {3, 8, 0, 5, 6, 4, 1, 3, 9},
        {4, 7, 5, 3, 7, 6, 7, 2, 4},
    };
    g.alphabet = 10;
    return g;
}

GrammarSpec gen_grammar(int m, int n, Rng& rng, bool distinct_prefix, int alphabet) {
    require(m >= 1 && n >= 1, "gen_grammar: m and n must be >= 1");
    require(alphabet >= 1, "gen_grammar: alphabet must be positive");
    if (distinct_prefix) {
        require(n >= 2, "gen_grammar: distinct prefixes need length >= 2");
        require(static_cast<long>(m) <= static_cast<long>(alphabet) * alphabet,
                "gen_grammar: not enough two-label prefixes for this many sub-sequences");
    }
    GrammarSpec g;
    g.alphabet = alphabet;
    std::set<std::pair<int, int>> prefixes;
    while (static_cast<int>(g.rows.size()) < m) {
        std::vector<int> row(n);
        for (int i = 0; i < n; ++i) row[i] = rng.uniform_int(alphabet);
        if (distinct_prefix) {
            const std::pair<int, int> prefix{row[0], row[1]};
            if (prefixes.count(prefix)) continue;
            prefixes.insert(prefix);
        }
        g.rows.push_back(std::move(row));
    }
    g.validate();
    return g;
}

std::vector<int> sample_stream(const GrammarSpec& grammar, int length, Rng& rng) {
    grammar.validate();
    require(length >= 1, "sample_stream: length must be >= 1");
    std::vector<int> stream;
    stream.reserve(length);
    while (static_cast<int>(stream.size()) < length) {
        const auto& row = grammar.rows[rng.uniform_int(grammar.num_subsequences())];
        for (int label : row) {
            stream.push_back(label);
            if (static_cast<int>(stream.size()) == length) break;
        }
    }
    return stream;
}

GrammarStream::GrammarStream(const GrammarSpec& grammar, std::uint64_t seed)
    : grammar_(&grammar), rng_(seed) {
    grammar.validate();
    row_ = rng_.uniform_int(grammar.num_subsequences());
}

int GrammarStream::next() {
    const int label = grammar_->rows[row_][pos_];
    if (++pos_ == grammar_->length()) {
        pos_ = 0;
        row_ = rng_.uniform_int(grammar_->num_subsequences());
    }
    return label;
}

BeliefState::BeliefState(const GrammarSpec& grammar, Start start) : grammar_(&grammar) {
    grammar.validate();
    const int m = grammar.num_subsequences();
    const int n = grammar.length();
    weights_.assign(static_cast<std::size_t>(m) * n, 0.0);
    if (start == Start::Boundary) {
        for (int r = 0; r < m; ++r) weights_[static_cast<std::size_t>(r) * n] = 1.0 / m;
    } else {
        std::fill(weights_.begin(), weights_.end(), 1.0 / (static_cast<double>(m) * n));
    }
}

Vector BeliefState::next_label_distribution() const {
    Vector dist(grammar_->alphabet, 0.0);
    const int n = grammar_->length();
    for (int r = 0; r < grammar_->num_subsequences(); ++r)
        for (int p = 0; p < n; ++p) {
            const double w = weights_[static_cast<std::size_t>(r) * n + p];
            if (w > 0.0) dist[grammar_->rows[r][p]] += w;
        }
    return dist;
}

int BeliefState::predict() const {
    const Vector dist = next_label_distribution();
    int best = 0;
    for (int i = 1; i < static_cast<int>(dist.size()); ++i)
        if (dist[i] > dist[best]) best = i;
    return best;
}

void BeliefState::observe(int label) {
    require(label >= 0 && label < grammar_->alphabet, "BeliefState: label outside the alphabet");
    const int m = grammar_->num_subsequences();
    const int n = grammar_->length();
    // Condition on the emission.
    double total = 0.0;
    for (int r = 0; r < m; ++r)
        for (int p = 0; p < n; ++p) {
            const std::size_t i = static_cast<std::size_t>(r) * n + p;
            if (grammar_->rows[r][p] != label) weights_[i] = 0.0;
            total += weights_[i];
        }
    if (total <= 0.0) {
        // Observation impossible under the current belief (only reachable if
        // the stream does not come from this grammar); restart from the
        // stationary prior conditioned on the label.
        for (int r = 0; r < m; ++r)
            for (int p = 0; p < n; ++p) {
                const std::size_t i = static_cast<std::size_t>(r) * n + p;
                weights_[i] = grammar_->rows[r][p] == label ? 1.0 : 0.0;
                total += weights_[i];
            }
        if (total <= 0.0) {
            // Label never appears in the grammar; fall back to stationary.
            std::fill(weights_.begin(), weights_.end(), 1.0);
            total = static_cast<double>(m) * n;
        }
    }
    for (double& w : weights_) w /= total;
    // Advance. Mass leaving the final position splits uniformly over all
    // sub-sequences at position zero.
    Vector advanced(weights_.size(), 0.0);
    double completed = 0.0;
    for (int r = 0; r < m; ++r) {
        for (int p = n - 1; p > 0; --p)
            advanced[static_cast<std::size_t>(r) * n + p] =
                weights_[static_cast<std::size_t>(r) * n + p - 1];
        completed += weights_[static_cast<std::size_t>(r) * n + n - 1];
    }
    if (completed > 0.0) {
        const double share = completed / m;
        for (int r = 0; r < m; ++r) advanced[static_cast<std::size_t>(r) * n] += share;
    }
    weights_ = std::move(advanced);
}

double BeliefState::weight_sum() const {
    double total = 0.0;
    for (double w : weights_) total += w;
    return total;
}

double ceiling_exact(const GrammarSpec& grammar) {
    grammar.validate();
    const int m = grammar.num_subsequences();
    const int n = grammar.length();
    // Rows sharing an observed prefix are indistinguishable; walk the prefix
    // tree level by level, crediting the most common next label per node.
    std::vector<std::vector<int>> nodes{std::vector<int>(m)};
    for (int r = 0; r < m; ++r) nodes[0][r] = r;
    long long credit = 0;
    for (int p = 0; p < n; ++p) {
        std::vector<std::vector<int>> next_nodes;
        for (const auto& node : nodes) {
            std::map<int, std::vector<int>> by_label;
            for (int r : node) by_label[grammar.rows[r][p]].push_back(r);
            std::size_t best = 0;
            for (const auto& [label, members] : by_label) best = std::max(best, members.size());
            credit += static_cast<long long>(best);
            for (auto& [label, members] : by_label) next_nodes.push_back(std::move(members));
        }
        nodes = std::move(next_nodes);
    }
    return static_cast<double>(credit) / (static_cast<double>(m) * n);
}

MonteCarloEstimate ceiling_montecarlo(const GrammarSpec& grammar, long steps, Rng& rng) {
    grammar.validate();
    require(steps >= 1, "ceiling_montecarlo: needs at least one step");
    GrammarStream stream(grammar, rng.next_u64());
    BeliefState belief(grammar, BeliefState::Start::Boundary);
    long correct = 0;
    for (long t = 0; t < steps; ++t) {
        const int predicted = belief.predict();
        const int actual = stream.next();
        if (predicted == actual) ++correct;
        belief.observe(actual);
    }
    MonteCarloEstimate est;
    est.trials = steps;
    est.accuracy = static_cast<double>(correct) / static_cast<double>(steps);
    est.stderr_est = std::sqrt(std::max(est.accuracy * (1.0 - est.accuracy), 1e-12) /
                               static_cast<double>(steps));
    return est;
}

double ngram_accuracy(const std::vector<int>& stream, int order, int alphabet) {
    require(order >= 1, "ngram_accuracy: order must be >= 1");
    require(alphabet >= 1, "ngram_accuracy: alphabet must be positive");
    if (static_cast<int>(stream.size()) <= order) return 0.0;
    std::map<std::vector<int>, std::vector<long>> counts;
    std::vector<long> unigram(alphabet, 0);
    long predictions = 0, correct = 0;
    for (std::size_t t = order; t < stream.size(); ++t) {
        const std::vector<int> context(stream.begin() + (t - order), stream.begin() + t);
        int predicted;
        auto it = counts.find(context);
        if (it != counts.end()) {
            const auto& c = it->second;
            predicted = 0;
            for (int l = 1; l < alphabet; ++l)
                if (c[l] > c[predicted]) predicted = l;
        } else {
            // Unseen context: back off to the running unigram majority.
            predicted = 0;
            for (int l = 1; l < alphabet; ++l)
                if (unigram[l] > unigram[predicted]) predicted = l;
        }
        const int actual = stream[t];
        ++predictions;
        if (predicted == actual) ++correct;
        counts[context].resize(alphabet, 0);
        counts[context][actual] += 1;
        unigram[actual] += 1;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions);
}

}  // namespace brsm
