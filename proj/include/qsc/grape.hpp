#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qsc/spin_chain.hpp"

namespace qsc {

struct GrapeConfig {
    int n_segments = 50;
    double lr = 0.5;
    int max_iters = 500;
    double field_min = 0.0;
    double field_max = 5.0;
    double fd_step = 1e-4;                   // central-difference step
    double converge_fidelity = 1.0 - 1e-9;   // early-exit threshold

    void validate() const;
};

struct GrapeResult {
    Eigen::MatrixXd schedule;             // n_segments x n_spins
    std::vector<double> fidelity_trace;   // best-so-far per iteration (index 0 = initial)
    double best_fidelity = 0.0;
    int iterations = 0;
};

// Final-state fidelity of a piecewise-constant schedule (each row held for
// spec.dt), simulated segment by segment.
double schedule_fidelity(const SpinChainSpec& spec, const Eigen::MatrixXd& schedule,
                         const StateVector& psi_init, const StateVector& psi_target);

// Central finite differences of schedule_fidelity over every segment-field
// scalar. Prefix/suffix states are cached so each entry costs one segment
// propagator, not a full re-simulation.
Eigen::MatrixXd grape_gradient(const SpinChainSpec& spec, const Eigen::MatrixXd& schedule,
                               const StateVector& psi_init, const StateVector& psi_target,
                               double fd_step);

// Projected gradient ascent on the noise-free model, fields clipped to
// [field_min, field_max] after every step. Backtracks the step size when an
// update would lower the fidelity.
GrapeResult grape_optimize(const SpinChainSpec& spec, const StateVector& psi_init,
                           const StateVector& psi_target, const GrapeConfig& config);

// Columns: segment,spin,field.
void write_schedule_csv(const std::string& path, const Eigen::MatrixXd& schedule);

}  // namespace qsc
