#include "latsp/boxspectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace latsp::box {

namespace {

constexpr double kPi = 3.14159265358979323846;

// g(c) = integral_0^pi sin(c u) du = (1 - cos(c pi)) / c, written as
// 2 sin^2(c pi / 2) / c to avoid cancellation. g(0) = 0 is the limit.
double g_sin_integral(double c) {
    if (c == 0.0) return 0.0;
    const double s = std::sin(0.5 * c * kPi);
    return 2.0 * s * s / c;
}

// g'(c); the closed form loses accuracy near c = 0, where a short even
// series takes over: g'(c) = pi^2/2 - pi^4 c^2/8 + pi^6 c^4/144 - ...
double g_sin_integral_prime(double c) {
    const double ac = std::abs(c);
    if (ac < 1e-4) {
        const double c2 = c * c;
        return kPi * kPi / 2.0 - std::pow(kPi, 4) * c2 / 8.0 +
               std::pow(kPi, 6) * c2 * c2 / 144.0;
    }
    const double s = std::sin(0.5 * c * kPi);
    return kPi * std::sin(c * kPi) / c - 2.0 * s * s / (c * c);
}

// (2/L) int_0^L sin(m pi z/L) sin(n pi z/L) sin(2 pi t z/L) dz, via
// product-to-sum; independent of L after substitution u = pi z / L.
double matrix_element(double m, double n, double t) {
    const double a = 2.0 * t;
    return (g_sin_integral(a + m - n) + g_sin_integral(a - m + n) -
            g_sin_integral(a + m + n) - g_sin_integral(a - m - n)) /
           (2.0 * kPi);
}

// Composite Gauss-Legendre of f over [0, L]. Panels are kept narrower than
// half the shortest oscillation period (maxfreq in units of pi/L).
double composite_quad(const std::function<double(double)>& f, double length,
                      double maxfreq, long points) {
    const QuadRule& rule = gauss_legendre_64();
    const long order = static_cast<long>(rule.nodes.size());
    long panels = static_cast<long>(std::ceil(maxfreq)) + 1;
    panels = std::max(panels, (points + order - 1) / order);
    const double h = length / static_cast<double>(panels);
    double total = 0.0;
    for (long p = 0; p < panels; ++p) {
        const double a = h * static_cast<double>(p);
        const double mid = a + 0.5 * h;
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            acc += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
        total += acc * 0.5 * h;
    }
    return total;
}

}  // namespace

void BoxSpec::validate() const {
    if (!(length > 0.0)) throw ConfigError("box: length must be positive");
    if (!(kinetic > 0.0)) throw ConfigError("box: kinetic constant must be positive");
    if (frequency < 1) throw ConfigError("box: potential frequency must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("box: alpha must be positive");
    if (mode_cutoff < 2) throw ConfigError("box: mode cutoff must be >= 2");
}

double phi(double n, double z, const BoxSpec& spec) {
    return std::sqrt(2.0 / spec.length) * std::sin(kPi * n * z / spec.length);
}

double e0(double n, const BoxSpec& spec) {
    const double w = kPi / spec.length;
    return w * w * spec.kinetic * n * n;
}

double potential(double z, const BoxSpec& spec) {
    return std::sin(2.0 * kPi * spec.frequency * z / spec.length);
}

double e1_closed(double n, const BoxSpec& spec) {
    if (!(n > 0.0)) throw ContractViolation("e1_closed: n must be positive");
    const double a = 2.0 * spec.frequency;
    return (2.0 * g_sin_integral(a) - g_sin_integral(a + 2.0 * n) -
            g_sin_integral(a - 2.0 * n)) /
           (2.0 * kPi);
}

double e1_prime(double n, const BoxSpec& spec) {
    const double a = 2.0 * spec.frequency;
    return (g_sin_integral_prime(a - 2.0 * n) - g_sin_integral_prime(a + 2.0 * n)) / kPi;
}

double e1_quad(double n, const BoxSpec& spec, long points) {
    const double L = spec.length;
    const double t = spec.frequency;
    auto f = [&](double z) {
        const double s = std::sin(kPi * n * z / L);
        return (2.0 / L) * s * s * std::sin(2.0 * kPi * t * z / L);
    };
    return composite_quad(f, L, 2.0 * n + 2.0 * t, points);
}

double coupling(double m, double n, const BoxSpec& spec) {
    if (!(m > 0.0) || !(n > 0.0)) throw ContractViolation("coupling: modes must be positive");
    return matrix_element(m, n, spec.frequency);
}

double coupling_quad(double m, double n, const BoxSpec& spec, long points) {
    const double L = spec.length;
    const double t = spec.frequency;
    auto f = [&](double z) {
        return (2.0 / L) * std::sin(kPi * m * z / L) * std::sin(kPi * n * z / L) *
               std::sin(2.0 * kPi * t * z / L);
    };
    return composite_quad(f, L, m + n + 2.0 * t, points);
}

double overlap_quad(double m, double n, const BoxSpec& spec, long points) {
    auto f = [&](double z) { return phi(m, z, spec) * phi(n, z, spec); };
    return composite_quad(f, spec.length, m + n, points);
}

SpectrumTable build_table(const BoxSpec& spec) {
    spec.validate();
    const int M = spec.mode_cutoff;
    SpectrumTable table;
    table.e0.resize(M);
    table.e1.resize(M);
    table.c = Eigen::MatrixXd::Zero(M, M);
    for (int i = 0; i < M; ++i) {
        const double n = i + 1;
        table.e0[i] = e0(n, spec);
        table.e1[i] = e1_closed(n, spec);
    }
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j) {
            const double v = coupling(i + 1, j + 1, spec);
            table.c(i, j) = v;
            table.c(j, i) = v;
        }
    return table;
}

void write_table_csv(const SpectrumTable& table, std::ostream& spectrum_out,
                     std::ostream& coupling_out) {
    spectrum_out << "n,E0,E1\n";
    for (int i = 0; i < table.modes(); ++i)
        spectrum_out << (i + 1) << ',' << fmt_double(table.e0[i]) << ','
                     << fmt_double(table.e1[i]) << '\n';
    coupling_out << "m,n,c\n";
    for (int m = 0; m < table.modes(); ++m)
        for (int n = 0; n < table.modes(); ++n)
            coupling_out << (m + 1) << ',' << (n + 1) << ',' << fmt_double(table.c(m, n))
                         << '\n';
}

SpectrumTable read_table_csv(std::istream& spectrum_in, std::istream& coupling_in) {
    SpectrumTable table;
    std::string line;
    if (!std::getline(spectrum_in, line) || line != "n,E0,E1")
        throw IoError("spectrum csv: bad header");
    while (std::getline(spectrum_in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        std::getline(ls, cell, ',');
        table.e0.push_back(std::stod(cell));
        if (!std::getline(ls, cell)) throw IoError("spectrum csv: short row");
        table.e1.push_back(std::stod(cell));
    }
    const int modes = table.modes();
    if (modes == 0) throw IoError("spectrum csv: no rows");
    table.c = Eigen::MatrixXd::Zero(modes, modes);
    if (!std::getline(coupling_in, line) || line != "m,n,c")
        throw IoError("coupling csv: bad header");
    while (std::getline(coupling_in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        const int m = std::stoi(cell);
        std::getline(ls, cell, ',');
        const int n = std::stoi(cell);
        if (!std::getline(ls, cell)) throw IoError("coupling csv: short row");
        if (m < 1 || m > modes || n < 1 || n > modes)
            throw IoError("coupling csv: mode outside spectrum range");
        table.c(m - 1, n - 1) = std::stod(cell);
    }
    return table;
}

double perturbed_psi(int n, double z, const BoxSpec& spec, const SpectrumTable& table,
                     CouplingMode mode) {
    if (n < 1 || n > table.modes())
        throw ContractViolation("perturbed_psi: mode outside table range");
    double value = phi(n, z, spec);
    for (int m = 1; m <= table.modes(); ++m) {
        if (m == n) continue;
        double coef = table.c(m - 1, n - 1);
        if (mode == CouplingMode::Textbook) coef /= table.e0[n - 1] - table.e0[m - 1];
        value += coef * phi(m, z, spec);
    }
    return value;
}

Eigen::VectorXd map_to_box(const Eigen::VectorXd& values, const BoxSpec& spec,
                           double margin) {
    if (values.size() == 0) throw ContractViolation("map_to_box: empty input");
    const double L = spec.length;
    const double lo = margin * L;
    const double hi = L - margin * L;
    const double vmin = values.minCoeff();
    const double vmax = values.maxCoeff();
    if (vmax - vmin < 1e-300) return Eigen::VectorXd::Constant(values.size(), 0.5 * L);
    const double scale = (hi - lo) / (vmax - vmin);
    return ((values.array() - vmin) * scale + lo).matrix();
}

QuadRule gauss_legendre(int order) {
    // Newton iteration on Legendre polynomials; standard construction.
    QuadRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = order * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    return rule;
}

const QuadRule& gauss_legendre_64() {
    static const QuadRule rule = gauss_legendre(64);
    return rule;
}

}  // namespace latsp::box
