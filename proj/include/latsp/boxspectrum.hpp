#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "latsp/common.hpp"

namespace latsp::box {

/// Physical configuration of the perturbed particle in a box.
struct BoxSpec {
    double length = 1.0;       ///< L, box on [0, L]
    double kinetic = 1.0;      ///< A, coefficient of -d^2/dz^2
    int frequency = 3;         ///< t, number of minima of the potential on (0, L)
    double alpha = 1.0;        ///< kinetic weight in the assignment loss
    int mode_cutoff = 10;      ///< M, basis size for expansions

    void validate() const;
};

/// Relative margin keeping box coordinates away from the walls, where the
/// quantum-number inversion is singular.
inline constexpr double kBoxMargin = 0.01;

/// Floor applied to inverted quantum numbers.
inline constexpr double kQuantumNumberFloor = 1e-3;

/// Box eigenfunction sqrt(2/L) sin(pi n z / L). Real n is allowed.
double phi(double n, double z, const BoxSpec& spec);

/// Unperturbed energy (pi/L)^2 A n^2.
double e0(double n, const BoxSpec& spec);

/// Perturbing potential sin(2 pi t z / L).
double potential(double z, const BoxSpec& spec);

/// First-order energy correction <phi_n|V|phi_n> in closed form.
///
/// The matrix element reduces to combinations of
///   g(c) = integral_0^pi sin(c u) du = 2 sin^2(c pi / 2) / c,
/// which is entire in c; the removable singularities at n = t and n -> 0
/// are handled exactly. Valid for any real n > 0.
double e1_closed(double n, const BoxSpec& spec);

/// Derivative of e1_closed with respect to n (needed by the energy loss).
double e1_prime(double n, const BoxSpec& spec);

/// Quadrature oracle for e1_closed: composite Gauss-Legendre with 64-node
/// panels no wider than half the shortest oscillation period, using at
/// least `points` nodes in total.
double e1_quad(double n, const BoxSpec& spec, long points);

/// Coupling matrix element <phi_m|V|phi_n> in closed form.
double coupling(double m, double n, const BoxSpec& spec);

/// Quadrature oracle for coupling().
double coupling_quad(double m, double n, const BoxSpec& spec, long points);

/// Quadrature of phi_m * phi_n over [0, L]; equals delta_{mn} for integer
/// modes. Exposed for the orthonormality checks.
double overlap_quad(double m, double n, const BoxSpec& spec, long points);

/// Tabulated spectrum for modes 1..M. The coupling matrix keeps a zero
/// diagonal, matching the m != n convention of the expansion sum.
struct SpectrumTable {
    std::vector<double> e0;    ///< e0[i] for mode n = i+1
    std::vector<double> e1;    ///< e1[i] for mode n = i+1
    Eigen::MatrixXd c;         ///< c(i, j) = coupling(i+1, j+1), zero diagonal

    int modes() const { return static_cast<int>(e0.size()); }
};

SpectrumTable build_table(const BoxSpec& spec);

/// CSV persistence: `n,E0,E1` rows plus a separate `m,n,c` coupling file.
void write_table_csv(const SpectrumTable& table, std::ostream& spectrum_out,
                     std::ostream& coupling_out);
SpectrumTable read_table_csv(std::istream& spectrum_in, std::istream& coupling_in);

/// How expansion coefficients enter the perturbed wavefunction.
enum class CouplingMode {
    PaperLiteral,  ///< coefficient = c_{m,n}
    Textbook,      ///< coefficient = c_{m,n} / (E0_n - E0_m)
};

/// psi_n(z) = phi_n(z) + sum_{m != n} coef(m, n) phi_m(z) over modes <= M.
double perturbed_psi(int n, double z, const BoxSpec& spec, const SpectrumTable& table,
                     CouplingMode mode = CouplingMode::PaperLiteral);

/// Affine min-max rescale of `values` onto [margin*L, L - margin*L].
/// A constant input maps to the midpoint L/2.
Eigen::VectorXd map_to_box(const Eigen::VectorXd& values, const BoxSpec& spec,
                           double margin = kBoxMargin);

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

const QuadRule& gauss_legendre_64();
QuadRule gauss_legendre(int order);

}  // namespace latsp::box
