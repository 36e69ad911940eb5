#include "qsc/grape.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qsc/csv.hpp"

namespace qsc {

using namespace std::complex_literals;

void GrapeConfig::validate() const {
    if (n_segments < 1) {
        throw std::invalid_argument("GrapeConfig: n_segments must be >= 1");
    }
    if (field_min > field_max) {
        throw std::invalid_argument("GrapeConfig: field bounds out of order");
    }
    if (lr <= 0.0 || fd_step <= 0.0 || max_iters < 0) {
        throw std::invalid_argument("GrapeConfig: lr, fd_step must be positive");
    }
}

namespace {

Operator propagator(const Operator& hamiltonian, double dt) {
    Eigen::SelfAdjointEigenSolver<Operator> solver(hamiltonian);
    const Eigen::VectorXd& eigenvalues = solver.eigenvalues();
    const Operator& vectors = solver.eigenvectors();
    Eigen::VectorXcd phases(eigenvalues.size());
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
        phases(k) = std::exp(-1.0i * eigenvalues(k) * dt);
    }
    return vectors * phases.asDiagonal() * vectors.adjoint();
}

Operator segment_propagator(const SpinChainSpec& spec, const Eigen::MatrixXd& schedule,
                            int segment) {
    return propagator(build_hamiltonian(spec, schedule.row(segment).transpose()), spec.dt);
}

}  // namespace

double schedule_fidelity(const SpinChainSpec& spec, const Eigen::MatrixXd& schedule,
                         const StateVector& psi_init, const StateVector& psi_target) {
    if (schedule.cols() != spec.n_spins) {
        throw std::invalid_argument("schedule_fidelity: schedule columns must equal n_spins");
    }
    StateVector psi = psi_init;
    for (Eigen::Index s = 0; s < schedule.rows(); ++s) {
        psi = evolve(psi, build_hamiltonian(spec, schedule.row(s).transpose()), spec.dt);
    }
    return fidelity(psi, psi_target);
}

Eigen::MatrixXd grape_gradient(const SpinChainSpec& spec, const Eigen::MatrixXd& schedule,
                               const StateVector& psi_init, const StateVector& psi_target,
                               double fd_step) {
    const int n_segments = static_cast<int>(schedule.rows());
    const int n_fields = static_cast<int>(schedule.cols());

    // phi[s]: state entering segment s. chi[s]: target pulled back through
    // segments s+1..end, so F = |chi[s]^dag U_s phi[s]|^2 for every s.
    std::vector<StateVector> phi(n_segments + 1);
    phi[0] = psi_init;
    std::vector<Operator> props(n_segments);
    for (int s = 0; s < n_segments; ++s) {
        props[s] = segment_propagator(spec, schedule, s);
        phi[s + 1] = props[s] * phi[s];
    }
    std::vector<StateVector> chi(n_segments);
    chi[n_segments - 1] = psi_target;
    for (int s = n_segments - 2; s >= 0; --s) {
        chi[s] = props[s + 1].adjoint() * chi[s + 1];
    }

    Eigen::MatrixXd gradient(n_segments, n_fields);
    Eigen::MatrixXd perturbed = schedule;
    for (int s = 0; s < n_segments; ++s) {
        for (int f = 0; f < n_fields; ++f) {
            const double original = schedule(s, f);
            perturbed(s, f) = original + fd_step;
            const Operator u_plus = segment_propagator(spec, perturbed, s);
            const double f_plus = std::norm(chi[s].dot(u_plus * phi[s]));
            perturbed(s, f) = original - fd_step;
            const Operator u_minus = segment_propagator(spec, perturbed, s);
            const double f_minus = std::norm(chi[s].dot(u_minus * phi[s]));
            perturbed(s, f) = original;
            gradient(s, f) = (f_plus - f_minus) / (2.0 * fd_step);
        }
    }
    return gradient;
}

GrapeResult grape_optimize(const SpinChainSpec& spec, const StateVector& psi_init,
                           const StateVector& psi_target, const GrapeConfig& config) {
    config.validate();
    SpinChainSpec ideal = spec;
    ideal.noise_level = 0.0;  // optimization runs on the noise-free model

    GrapeResult result;
    result.schedule = Eigen::MatrixXd::Zero(config.n_segments, ideal.n_spins);

    double current = schedule_fidelity(ideal, result.schedule, psi_init, psi_target);
    if (!std::isfinite(current)) {
        throw std::runtime_error("grape_optimize: non-finite fidelity at the initial schedule");
    }
    result.best_fidelity = current;
    result.fidelity_trace.push_back(current);

    Eigen::MatrixXd fields = result.schedule;
    Eigen::MatrixXd best_fields = fields;
    double lr = config.lr;

    for (int iter = 0; iter < config.max_iters; ++iter) {
        if (result.best_fidelity >= config.converge_fidelity) {
            break;
        }
        const Eigen::MatrixXd gradient =
            grape_gradient(ideal, fields, psi_init, psi_target, config.fd_step);

        Eigen::MatrixXd candidate;
        double f_candidate = -1.0;
        for (int backtrack = 0; backtrack < 24; ++backtrack) {
            candidate = (fields + lr * gradient)
                            .cwiseMax(config.field_min)
                            .cwiseMin(config.field_max);
            f_candidate = schedule_fidelity(ideal, candidate, psi_init, psi_target);
            if (!std::isfinite(f_candidate)) {
                throw std::runtime_error("grape_optimize: non-finite fidelity during ascent");
            }
            if (f_candidate >= current - 1e-12) {
                break;
            }
            lr *= 0.5;
        }
        fields = candidate;
        current = f_candidate;
        lr = std::min(lr * 1.2, config.lr * 10.0);

        if (current > result.best_fidelity) {
            result.best_fidelity = current;
            best_fields = fields;
        }
        result.fidelity_trace.push_back(result.best_fidelity);
        result.iterations = iter + 1;
    }
    result.schedule = best_fields;
    return result;
}

void write_schedule_csv(const std::string& path, const Eigen::MatrixXd& schedule) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_schedule_csv: cannot open " + path);
    }
    out << "segment,spin,field\n";
    for (Eigen::Index s = 0; s < schedule.rows(); ++s) {
        for (Eigen::Index f = 0; f < schedule.cols(); ++f) {
            out << s << ',' << f << ',' << format_double(schedule(s, f)) << '\n';
        }
    }
}

}  // namespace qsc
