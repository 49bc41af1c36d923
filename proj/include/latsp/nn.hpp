#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latsp/common.hpp"

namespace latsp::nn {

enum class Activation { Identity, Tanh, Relu, Softplus };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct Layer {
    Eigen::MatrixXd weight;     // [in x out]
    Eigen::RowVectorXd bias;    // [1 x out]
    Activation activation = Activation::Identity;
};

/// Per-layer parameter gradients plus the gradient with respect to the
/// input batch, so networks can be chained (decoder -> sample -> encoder).
struct Gradients {
    std::vector<Eigen::MatrixXd> dweight;
    std::vector<Eigen::RowVectorXd> dbias;
    Eigen::MatrixXd dinput;
};

/// Intermediate values of one forward pass, consumed by backward().
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;  // inputs[i]: input to layer i
    std::vector<Eigen::MatrixXd> pre;     // pre[i]: pre-activation of layer i
    Eigen::MatrixXd output;
};

/// Fully-connected network with 64-bit parameters. A plain value type:
/// copyable, movable, no interior locking; one trainer mutates a given
/// instance at a time.
class DenseNetwork {
public:
    DenseNetwork() = default;

    /// Glorot-uniform initialization in +/- sqrt(6 / (fan_in + fan_out)).
    DenseNetwork(const std::vector<int>& sizes, const std::vector<Activation>& activations,
                 Rng& rng);

    int input_size() const;
    int output_size() const;
    std::size_t layer_count() const { return layers_.size(); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    std::vector<int> sizes() const;

    /// Batch forward pass, rows are samples. Pure: identical parameters
    /// and input give bit-identical output.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& batch) const;

    ForwardCache forward_cached(const Eigen::MatrixXd& batch) const;

    /// Backpropagate `upstream` (dLoss/dOutput, same shape as the output)
    /// through the pass recorded in `cache`.
    Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;

    bool parameters_finite() const;

private:
    std::vector<Layer> layers_;
};

struct OptimizerState {
    enum class Kind { GradientDescent, AdaptiveMoment };

    Kind kind = Kind::AdaptiveMoment;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;

    std::vector<Eigen::MatrixXd> m_weight, v_weight;
    std::vector<Eigen::RowVectorXd> m_bias, v_bias;

    static OptimizerState gradient_descent(double lr);
    static OptimizerState adaptive_moment(double lr);

    /// Allocate zeroed moment accumulators shaped like the parameters.
    void init_for(const DenseNetwork& net);
};

/// Apply one optimizer update in place. Throws TrainingError naming the
/// offending layer if a gradient is non-finite.
void step(DenseNetwork& net, const Gradients& grads, OptimizerState& opt);

/// Loss probe used by grad_check: returns the loss and its analytic
/// parameter gradients for the given network and batch.
using LossAndGrad =
    std::function<std::pair<double, Gradients>(const DenseNetwork&, const Eigen::MatrixXd&)>;

/// Maximum relative discrepancy between analytic and central-difference
/// gradients over every parameter. `floor` guards the denominator so that
/// near-zero gradients are compared absolutely.
double grad_check(const DenseNetwork& net, const LossAndGrad& loss, const Eigen::MatrixXd& batch,
                  double step_size = 1e-5, double floor = 1e-4);

/// Flat text persistence: `layers:` and `activations:` header lines, then
/// one row-major line per tensor. Round-trips values to 1e-15.
void save_network(const DenseNetwork& net, std::ostream& out);
DenseNetwork load_network(std::istream& in);

}  // namespace latsp::nn
