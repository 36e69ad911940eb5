#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace qsc {

// Dense ReLU network with a linear output layer. He-uniform init.
struct MlpSpec {
    std::vector<int> layer_sizes;  // input, hidden..., output
    uint64_t seed = 0;

    void validate() const;
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
};

// Flat parameter order: layer-major, weights (row-major) before biases.
struct MlpParams {
    MlpSpec spec;
    std::vector<Eigen::MatrixXd> weights;  // out x in per layer
    std::vector<Eigen::VectorXd> biases;
};

int param_count(const MlpSpec& spec);
MlpParams make_mlp(const MlpSpec& spec);

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input);

// Gradient of <output_grad, forward(params, input)> with respect to the flat
// parameter vector.
Eigen::VectorXd backward(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& output_grad);

// Same, accumulated into `flat_accum` (used by batched learners).
void backward_into(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad, Eigen::Ref<Eigen::VectorXd> flat_accum);

Eigen::VectorXd flatten(const MlpParams& params);
void unflatten(const Eigen::VectorXd& flat, MlpParams& params);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(const MlpSpec& spec, double lr);

// Bias-corrected descent step: params <- params - update. Non-finite
// gradients are refused.
void adam_step(AdamState& opt, MlpParams& params, const Eigen::VectorXd& grad);

void hard_update(MlpParams& target, const MlpParams& online);

// Checkpoint layout: one JSON header line (spec fields), then the flat
// parameter vector as little-endian 64-bit floats.
void save_checkpoint(const std::string& path, const MlpParams& params);
MlpParams load_checkpoint(const std::string& path);

}  // namespace qsc
