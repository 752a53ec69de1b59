#include "brsm/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "brsm/learning.hpp"
#include "brsm/readout.hpp"
#include "brsm/trainer.hpp"

namespace brsm {

namespace {

double rel_error(double analytic, double numeric) {
    const double denom = std::max({1e-6, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

GradCheckTensorReport& tensor_report(GradCheckReport& report, const std::string& name) {
    for (auto& t : report.tensors)
        if (t.name == name) return t;
    report.tensors.push_back({name, 0.0, 0, 0});
    return report.tensors.back();
}

// The discrete choices one forward step made; finite differences are only
// meaningful while these stay fixed.
std::vector<int> step_signature(const StepOutput& out) {
    std::vector<int> sig;
    for (auto v : out.masks.group_active) sig.push_back(v);
    for (int v : out.masks.group_winner) sig.push_back(v);
    for (int v : out.group_max_cell) sig.push_back(v);
    for (auto v : out.mem_from_decay) sig.push_back(v);
    for (auto v : out.decay_clamped) sig.push_back(v);
    return sig;
}

struct RsmInstance {
    LayerGeometry geom;
    RsmOptions opts;
    RsmLayer layer;
    LayerState state;  // post-warmup state, reused (copied) per evaluation
    Vector input;
    Vector target;
};

RsmInstance make_rsm_instance(Rng& rng, bool partitioned) {
    LayerGeometry geom;
    geom.cells_per_group = partitioned ? 1 : 1 + rng.uniform_int(2);
    geom.input_dim = 2 + rng.uniform_int(7);
    if (partitioned) {
        // Three equal blocks so every per-partition winner budget is 1.
        const int per = 1 + rng.uniform_int(2);
        geom.groups = 3 * per;
        PartitionSpec parts;
        parts.blocks = {{PartitionKind::FeedForwardOnly, per},
                        {PartitionKind::RecurrentOnly, per},
                        {PartitionKind::Integrated, per}};
        geom.partitions = parts;
        geom.winners = 3;
    } else {
        geom.groups = 3 + rng.uniform_int(4);  // 3..6
        geom.winners = 1 + rng.uniform_int(geom.groups);
    }

    RsmOptions opts;
    opts.strategy = UtilizationStrategy::Boosting;
    opts.boost_strength = 1.2;
    opts.trainable_decay = true;
    opts.initial_decay_logit = rng.uniform(0.0, 2.0);

    Rng init_rng(rng.next_u64());
    RsmInstance inst{geom, opts, RsmLayer(geom, opts, init_rng), LayerState::zeros(0), {}, {}};
    inst.state = inst.layer.make_state();

    // Uneven duty cycles so the boost term is a real per-cell factor.
    for (double& d : inst.layer.duty()) d = rng.uniform(0.0, 0.3);
    // Spread the decay logits so the sigmoid slope varies per cell.
    for (double& l : inst.layer.weights().decay_logits) l = rng.uniform(-1.0, 2.5);

    // Warm up so the memory trace and recurrent input are non-trivial and
    // both merge branches occur.
    for (int t = 0; t < 4; ++t) {
        Vector x(geom.input_dim);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        inst.layer.forward(x, inst.state, false);
    }

    inst.input.resize(geom.input_dim);
    inst.target.resize(geom.input_dim);
    for (double& v : inst.input) v = rng.uniform(-1.0, 1.0);
    for (double& v : inst.target) v = rng.uniform(-1.0, 1.0);
    return inst;
}

// Loss and signature at the current parameter values.
std::pair<double, std::vector<int>> rsm_objective(RsmInstance& inst) {
    LayerState scratch = inst.state;
    const StepOutput out = inst.layer.forward(inst.input, scratch, false);
    return {mse_loss(out.prediction, inst.target), step_signature(out)};
}

void check_rsm_tensor(GradCheckReport& report, RsmInstance& inst, const std::string& name,
                      double* params, const double* analytic, std::size_t size,
                      const std::vector<int>& base_sig, double h) {
    GradCheckTensorReport& tr = tensor_report(report, name);
    for (std::size_t i = 0; i < size; ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const auto [up, sig_up] = rsm_objective(inst);
        params[i] = saved - h;
        const auto [down, sig_down] = rsm_objective(inst);
        params[i] = saved;
        if (sig_up != base_sig || sig_down != base_sig) {
            ++tr.skipped;
            continue;
        }
        const double numeric = (up - down) / (2.0 * h);
        tr.max_rel_error = std::max(tr.max_rel_error, rel_error(analytic[i], numeric));
        ++tr.checked;
    }
}

void check_rsm_instance(GradCheckReport& report, Rng& rng, bool partitioned, double h,
                        bool corrupt) {
    RsmInstance inst = make_rsm_instance(rng, partitioned);

    LayerState scratch = inst.state;
    const StepOutput out = inst.layer.forward(inst.input, scratch, false);
    const std::vector<int> base_sig = step_signature(out);
    const Vector loss_grad = mse_loss_grad(out.prediction, inst.target);
    Gradients grads = backward_step(out, inst.layer.weights(), inst.geom, loss_grad, 0.0);
    if (corrupt) grads.w_ff.data()[0] += 1e-3;

    LayerWeights& w = inst.layer.weights();
    check_rsm_tensor(report, inst, "w_ff", w.w_ff.data().data(), grads.w_ff.data().data(),
                     w.w_ff.size(), base_sig, h);
    check_rsm_tensor(report, inst, "w_rec", w.w_rec.data().data(), grads.w_rec.data().data(),
                     w.w_rec.size(), base_sig, h);
    check_rsm_tensor(report, inst, "w_dec", w.w_dec.data().data(), grads.w_dec.data().data(),
                     w.w_dec.size(), base_sig, h);
    check_rsm_tensor(report, inst, "decay_logits", w.decay_logits.data(),
                     grads.decay_logits.data(), w.decay_logits.size(), base_sig, h);
}

std::vector<int> classifier_signature(const Classifier::Forward& fwd) {
    std::vector<int> sig;
    for (double x : fwd.hidden_pre) sig.push_back(x > 0.0 ? 1 : 0);
    return sig;
}

void check_classifier_tensor(GradCheckReport& report, Classifier& net, const Vector& input,
                             int label, const std::string& name, double* params,
                             const double* analytic, std::size_t size,
                             const std::vector<int>& base_sig, double h) {
    GradCheckTensorReport& tr = tensor_report(report, name);
    for (std::size_t i = 0; i < size; ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const Classifier::Forward up = net.forward(input);
        params[i] = saved - h;
        const Classifier::Forward down = net.forward(input);
        params[i] = saved;
        if (classifier_signature(up) != base_sig || classifier_signature(down) != base_sig) {
            ++tr.skipped;
            continue;
        }
        const double numeric =
            (net.cross_entropy(up, label) - net.cross_entropy(down, label)) / (2.0 * h);
        tr.max_rel_error = std::max(tr.max_rel_error, rel_error(analytic[i], numeric));
        ++tr.checked;
    }
}

void check_classifier_instance(GradCheckReport& report, Rng& rng, double h) {
    ClassifierConfig cfg;
    cfg.input_dim = 3 + rng.uniform_int(4);
    cfg.hidden_dim = 4 + rng.uniform_int(4);
    cfg.output_dim = 2 + rng.uniform_int(4);
    Rng init_rng(rng.next_u64());
    Classifier net(cfg, init_rng);
    Vector input(cfg.input_dim);
    for (double& v : input) v = rng.uniform(-1.0, 1.0);
    const int label = rng.uniform_int(cfg.output_dim);

    const Classifier::Forward fwd = net.forward(input);
    const std::vector<int> base_sig = classifier_signature(fwd);
    const Classifier::Grads grads = net.backward(fwd, label);

    check_classifier_tensor(report, net, input, label, "classifier_w1", net.w1().data().data(),
                            grads.w1.data().data(), net.w1().size(), base_sig, h);
    check_classifier_tensor(report, net, input, label, "classifier_b1", net.b1().data(),
                            grads.b1.data(), net.b1().size(), base_sig, h);
    check_classifier_tensor(report, net, input, label, "classifier_w2", net.w2().data().data(),
                            grads.w2.data().data(), net.w2().size(), base_sig, h);
    check_classifier_tensor(report, net, input, label, "classifier_b2", net.b2().data(),
                            grads.b2.data(), net.b2().size(), base_sig, h);
}

}  // namespace

bool GradCheckReport::passed() const {
    for (const auto& t : tensors) {
        if (t.max_rel_error > tolerance) return false;
        if (t.checked == 0) return false;  // everything skipped = no evidence
    }
    return !tensors.empty();
}

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    os << "gradient check over " << instances << " instances (tolerance " << tolerance << ")\n";
    for (const auto& t : tensors) {
        os << "  " << t.name << ": max rel error " << t.max_rel_error << " over " << t.checked
           << " coordinates (" << t.skipped << " skipped at winner-set boundaries)"
           << (t.max_rel_error <= tolerance && t.checked > 0 ? "" : "  <-- FAIL") << '\n';
    }
    return os.str();
}

GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts) {
    GradCheckReport report;
    report.instances = opts.instances;
    report.tolerance = opts.tolerance;
    Rng rng(derive_seed(seed, 0x6abc));
    for (int i = 0; i < opts.instances; ++i) {
        const bool partitioned = i % 4 == 3;
        check_rsm_instance(report, rng, partitioned, opts.step, opts.corrupt && i == 0);
        check_classifier_instance(report, rng, opts.step);
    }
    return report;
}

}  // namespace brsm
