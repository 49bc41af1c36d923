#include "latsp/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace latsp::nn {

namespace {

double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Softplus:
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    return x;
}

// Derivative as a function of the pre-activation.
double apply_act_grad(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
    }
    return 1.0;
}

}  // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "softplus") return Activation::Softplus;
    throw ConfigError("unknown activation: " + name);
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Softplus: return "softplus";
    }
    return "identity";
}

DenseNetwork::DenseNetwork(const std::vector<int>& sizes,
                           const std::vector<Activation>& activations, Rng& rng) {
    if (sizes.size() < 2) throw ContractViolation("network needs at least one layer");
    if (activations.size() != sizes.size() - 1)
        throw ContractViolation("one activation per layer required");
    for (int s : sizes)
        if (s <= 0) throw ContractViolation("layer sizes must be positive");
    layers_.resize(sizes.size() - 1);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const int fan_in = sizes[i];
        const int fan_out = sizes[i + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Layer& layer = layers_[i];
        layer.weight.resize(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
        layer.bias = Eigen::RowVectorXd::Zero(fan_out);
        layer.activation = activations[i];
    }
}

int DenseNetwork::input_size() const {
    if (layers_.empty()) return 0;
    return static_cast<int>(layers_.front().weight.rows());
}

int DenseNetwork::output_size() const {
    if (layers_.empty()) return 0;
    return static_cast<int>(layers_.back().weight.cols());
}

std::vector<int> DenseNetwork::sizes() const {
    std::vector<int> s;
    if (layers_.empty()) return s;
    s.push_back(static_cast<int>(layers_.front().weight.rows()));
    for (const Layer& l : layers_) s.push_back(static_cast<int>(l.weight.cols()));
    return s;
}

Eigen::MatrixXd DenseNetwork::forward(const Eigen::MatrixXd& batch) const {
    if (batch.cols() != input_size())
        throw ContractViolation("forward: batch width " + std::to_string(batch.cols()) +
                                " != input size " + std::to_string(input_size()));
    Eigen::MatrixXd h = batch;
    for (const Layer& layer : layers_) {
        Eigen::MatrixXd pre = (h * layer.weight).rowwise() + layer.bias;
        h = pre.unaryExpr([&](double x) { return apply_act(layer.activation, x); });
    }
    return h;
}

ForwardCache DenseNetwork::forward_cached(const Eigen::MatrixXd& batch) const {
    if (batch.cols() != input_size())
        throw ContractViolation("forward: batch width " + std::to_string(batch.cols()) +
                                " != input size " + std::to_string(input_size()));
    ForwardCache cache;
    cache.inputs.reserve(layers_.size());
    cache.pre.reserve(layers_.size());
    Eigen::MatrixXd h = batch;
    for (const Layer& layer : layers_) {
        cache.inputs.push_back(h);
        Eigen::MatrixXd pre = (h * layer.weight).rowwise() + layer.bias;
        cache.pre.push_back(pre);
        h = pre.unaryExpr([&](double x) { return apply_act(layer.activation, x); });
    }
    cache.output = h;
    return cache;
}

Gradients DenseNetwork::backward(const ForwardCache& cache,
                                 const Eigen::MatrixXd& upstream) const {
    if (cache.inputs.size() != layers_.size())
        throw ContractViolation("backward: cache does not match network");
    if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
        throw ContractViolation("backward: upstream gradient shape mismatch");
    Gradients grads;
    grads.dweight.resize(layers_.size());
    grads.dbias.resize(layers_.size());
    Eigen::MatrixXd delta = upstream;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
        const Layer& layer = layers_[idx];
        Eigen::MatrixXd local = cache.pre[idx].unaryExpr(
            [&](double x) { return apply_act_grad(layer.activation, x); });
        delta.array() *= local.array();
        grads.dweight[idx] = cache.inputs[idx].transpose() * delta;
        grads.dbias[idx] = delta.colwise().sum();
        delta = (delta * layer.weight.transpose()).eval();
    }
    grads.dinput = delta;
    return grads;
}

bool DenseNetwork::parameters_finite() const {
    for (const Layer& l : layers_)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

OptimizerState OptimizerState::gradient_descent(double lr) {
    OptimizerState s;
    s.kind = Kind::GradientDescent;
    s.learning_rate = lr;
    return s;
}

OptimizerState OptimizerState::adaptive_moment(double lr) {
    OptimizerState s;
    s.kind = Kind::AdaptiveMoment;
    s.learning_rate = lr;
    return s;
}

void OptimizerState::init_for(const DenseNetwork& net) {
    m_weight.clear();
    v_weight.clear();
    m_bias.clear();
    v_bias.clear();
    step_count = 0;
    for (const Layer& l : net.layers()) {
        m_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        v_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        m_bias.push_back(Eigen::RowVectorXd::Zero(l.bias.cols()));
        v_bias.push_back(Eigen::RowVectorXd::Zero(l.bias.cols()));
    }
}

namespace {

template <class Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, const OptimizerState& opt,
                 double bc1, double bc2) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = (opt.beta2 * v.array() + (1.0 - opt.beta2) * grad.array().square()).matrix();
    param.array() -=
        opt.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.epsilon);
}

}  // namespace

void step(DenseNetwork& net, const Gradients& grads, OptimizerState& opt) {
    auto& layers = net.layers();
    if (grads.dweight.size() != layers.size() || grads.dbias.size() != layers.size())
        throw ContractViolation("step: gradient count does not match layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (grads.dweight[i].rows() != layers[i].weight.rows() ||
            grads.dweight[i].cols() != layers[i].weight.cols() ||
            grads.dbias[i].cols() != layers[i].bias.cols())
            throw ContractViolation("step: gradient shape mismatch at layer " +
                                    std::to_string(i));
        if (!grads.dweight[i].allFinite() || !grads.dbias[i].allFinite())
            throw TrainingError("non-finite gradient at layer " + std::to_string(i));
    }
    if (opt.kind == OptimizerState::Kind::AdaptiveMoment && opt.m_weight.size() != layers.size())
        opt.init_for(net);
    ++opt.step_count;
    if (opt.kind == OptimizerState::Kind::GradientDescent) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight -= opt.learning_rate * grads.dweight[i];
            layers[i].bias -= opt.learning_rate * grads.dbias[i];
        }
        return;
    }
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_update(layers[i].weight, grads.dweight[i], opt.m_weight[i], opt.v_weight[i], opt,
                    bc1, bc2);
        adam_update(layers[i].bias, grads.dbias[i], opt.m_bias[i], opt.v_bias[i], opt, bc1, bc2);
    }
}

double grad_check(const DenseNetwork& net, const LossAndGrad& loss, const Eigen::MatrixXd& batch,
                  double step_size, double floor) {
    const auto [base_loss, analytic] = loss(net, batch);
    (void)base_loss;
    DenseNetwork probe = net;
    double worst = 0.0;
    for (std::size_t li = 0; li < probe.layers().size(); ++li) {
        Layer& layer = probe.layers()[li];
        auto check_entry = [&](double& value, double analytic_grad) {
            const double saved = value;
            value = saved + step_size;
            const double up = loss(probe, batch).first;
            value = saved - step_size;
            const double down = loss(probe, batch).first;
            value = saved;
            const double numeric = (up - down) / (2.0 * step_size);
            const double denom =
                std::max({std::abs(analytic_grad), std::abs(numeric), floor});
            worst = std::max(worst, std::abs(analytic_grad - numeric) / denom);
        };
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                check_entry(layer.weight(r, c), analytic.dweight[li](r, c));
        for (Eigen::Index c = 0; c < layer.bias.cols(); ++c)
            check_entry(layer.bias(c), analytic.dbias[li](c));
    }
    return worst;
}

void save_network(const DenseNetwork& net, std::ostream& out) {
    out << "layers:";
    for (int s : net.sizes()) out << ' ' << s;
    out << '\n';
    out << "activations:";
    for (const Layer& l : net.layers()) out << ' ' << activation_name(l.activation);
    out << '\n';
    for (const Layer& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                out << (r == 0 && c == 0 ? "" : " ") << fmt_double(l.weight(r, c));
        out << '\n';
        for (Eigen::Index c = 0; c < l.bias.cols(); ++c)
            out << (c == 0 ? "" : " ") << fmt_double(l.bias(c));
        out << '\n';
    }
}

DenseNetwork load_network(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("layers:", 0) != 0)
        throw IoError("network file: missing 'layers:' header");
    std::istringstream sizes_in(line.substr(7));
    std::vector<int> sizes;
    for (int s; sizes_in >> s;) sizes.push_back(s);
    if (sizes.size() < 2) throw IoError("network file: need at least two layer sizes");

    if (!std::getline(in, line) || line.rfind("activations:", 0) != 0)
        throw IoError("network file: missing 'activations:' header");
    std::istringstream acts_in(line.substr(12));
    std::vector<Activation> acts;
    for (std::string name; acts_in >> name;) acts.push_back(activation_from_name(name));
    if (acts.size() != sizes.size() - 1)
        throw IoError("network file: activation count does not match layers");

    Rng rng(0);
    DenseNetwork net(sizes, acts, rng);
    for (Layer& l : net.layers()) {
        if (!std::getline(in, line)) throw IoError("network file: truncated weight tensor");
        std::istringstream ws(line);
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                if (!(ws >> l.weight(r, c))) throw IoError("network file: short weight row");
        if (!std::getline(in, line)) throw IoError("network file: truncated bias tensor");
        std::istringstream bs(line);
        for (Eigen::Index c = 0; c < l.bias.cols(); ++c)
            if (!(bs >> l.bias(c))) throw IoError("network file: short bias row");
    }
    return net;
}

}  // namespace latsp::nn
