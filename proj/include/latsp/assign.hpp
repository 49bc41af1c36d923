#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "latsp/boxspectrum.hpp"
#include "latsp/common.hpp"
#include "latsp/nn.hpp"
#include "latsp/vae.hpp"

namespace latsp::assign {

/// Which inversion recovers the quantum number from a wavefunction value.
enum class InversionMode {
    PaperLiteral,  ///< n = (L / (pi z)) asin(clamp(L psi^2 / 2))
    Corrected,     ///< n = (L / (pi z)) asin(clamp(sqrt(L/2) |psi|)), exact inverse of phi_n
};

enum class ProjectionMode {
    FirstPrincipalComponent,
    PerDimensionMean,
};

InversionMode inversion_from_name(const std::string& name);
std::string inversion_name(InversionMode m);
ProjectionMode projection_from_name(const std::string& name);
std::string projection_name(ProjectionMode m);

struct AssignConfig {
    std::vector<int> hidden{32, 32};
    int epochs = 150;
    int batch_size = 64;
    double learning_rate = 3e-3;
    box::BoxSpec spec;
    double norm_weight = 1.0;  ///< weight of the unit-norm penalty on psi
    InversionMode inversion = InversionMode::Corrected;
    ProjectionMode projection = ProjectionMode::FirstPrincipalComponent;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_text() const;
    std::uint64_t digest() const;
};

/// Per-sample wavefunction values, box coordinates, quantum numbers, and
/// energies, plus per-class aggregates computed against held labels.
struct EnergyAssignment {
    Eigen::VectorXd psi;
    Eigen::VectorXd z_box;
    Eigen::VectorXd n;
    Eigen::VectorXd energy;
    std::vector<int> labels;

    struct ClassStats {
        int label = 0;
        int count = 0;
        double mean_energy = 0.0;
        double std_energy = 0.0;
        double mean_n = 0.0;
        double std_n = 0.0;
    };
    std::vector<ClassStats> class_stats;

    int n_samples() const { return static_cast<int>(psi.size()); }
};

/// Scalar coordinate per sample from the latent means, before map_to_box.
/// FirstPrincipalComponent projects onto the top covariance eigenvector;
/// PerDimensionMean averages the coordinates of each sample.
Eigen::VectorXd project_latent(const vae::LatentEmbedding& emb, const AssignConfig& cfg);

/// Quantum number from (psi, z). Result is floored at kQuantumNumberFloor;
/// the arcsin argument is hard-clamped to [0, 1] with zero gradient
/// outside. z_box below the wall margin is a contract violation.
double quantum_number(double psi, double z_box, const box::BoxSpec& spec, InversionMode mode);

struct QuantumNumberGrad {
    double n = 0.0;
    double dn_dpsi = 0.0;
    bool clamped = false;  ///< arcsin argument hit 1
    bool floored = false;  ///< raw value fell below the floor
};

QuantumNumberGrad quantum_number_grad(double psi, double z_box, const box::BoxSpec& spec,
                                      InversionMode mode);

struct EnergyLossResult {
    double loss = 0.0;
    double penalty = 0.0;
    double clamp_rate = 0.0;
    Eigen::VectorXd energy;
    Eigen::VectorXd n;
    Eigen::VectorXd dloss_dpsi;
};

/// loss = mean_i[alpha n_i^2 + E1(n_i)] + w_norm (L mean_i(psi_i^2) - 1)^2,
/// with analytic per-psi gradients for backpropagation.
EnergyLossResult energy_loss(const Eigen::VectorXd& psi, const Eigen::VectorXd& z_box,
                             const AssignConfig& cfg);

/// Derivative of the total loss along the uniform-norm coordinate
/// u = mean(psi^2) at psi == 0. The pointwise psi-gradient vanishes there
/// by evenness; this directional derivative is -2 w_norm L, so the
/// collapsed output is not a minimum when the penalty is active.
double collapse_gradient_at_zero(const AssignConfig& cfg);

struct AssignEpochStats {
    int epoch = 0;
    double loss = 0.0;
    double mean_n = 0.0;
    double mean_energy = 0.0;
    double clamp_rate = 0.0;
};

struct AssignTrainResult {
    nn::DenseNetwork network;
    std::vector<AssignEpochStats> trace;
};

/// Train the psi network (latent means -> scalar) by minimizing the
/// perturbed energy through the quantum-number inversion.
AssignTrainResult train_assigner(const vae::LatentEmbedding& emb, const AssignConfig& cfg);

/// Deterministic per-sample assignment with a trained network, plus
/// per-class aggregates from the held labels.
EnergyAssignment assign_energies(const nn::DenseNetwork& network,
                                 const vae::LatentEmbedding& emb, const AssignConfig& cfg);

/// Class-mean energies sorted ascending.
std::vector<double> sorted_class_means(const EnergyAssignment& assignment);

/// Consecutive differences of the sorted class-mean energies.
std::vector<double> spectrum_gap(const EnergyAssignment& assignment);

void write_assignment_csv(const EnergyAssignment& a, std::ostream& out);
EnergyAssignment read_assignment_csv(std::istream& in);
void write_trace_csv(const std::vector<AssignEpochStats>& trace, std::ostream& out);
std::vector<AssignEpochStats> read_trace_csv(std::istream& in);

}  // namespace latsp::assign
