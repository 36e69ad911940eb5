#include "qsc/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "qsc/rng.hpp"

namespace qsc {

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("MlpSpec: need at least input and output layers");
    }
    for (int size : layer_sizes) {
        if (size < 1) {
            throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
        }
    }
}

int param_count(const MlpSpec& spec) {
    spec.validate();
    int count = 0;
    for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        count += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
    }
    return count;
}

MlpParams make_mlp(const MlpSpec& spec) {
    spec.validate();
    MlpParams params;
    params.spec = spec;
    Rng rng(spec.seed);
    for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        Eigen::MatrixXd w(out, in);
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < in; ++j) {
                w(i, j) = limit * (2.0 * rng.uniform01() - 1.0);
            }
        }
        params.weights.push_back(std::move(w));
        params.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return params;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input) {
    if (input.size() != params.spec.input_size()) {
        throw std::invalid_argument("forward: input size mismatch");
    }
    Eigen::VectorXd activation = input;
    const size_t n_layers = params.weights.size();
    for (size_t l = 0; l < n_layers; ++l) {
        activation = (params.weights[l] * activation + params.biases[l]).eval();
        if (l + 1 < n_layers) {
            activation = activation.cwiseMax(0.0);
        }
    }
    return activation;
}

void backward_into(const MlpParams& params, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad, Eigen::Ref<Eigen::VectorXd> flat_accum) {
    if (input.size() != params.spec.input_size()) {
        throw std::invalid_argument("backward: input size mismatch");
    }
    if (output_grad.size() != params.spec.output_size()) {
        throw std::invalid_argument("backward: output_grad size mismatch");
    }
    const size_t n_layers = params.weights.size();

    // Forward pass, keeping pre-activations and activations.
    std::vector<Eigen::VectorXd> activations(n_layers + 1);
    std::vector<Eigen::VectorXd> preacts(n_layers);
    activations[0] = input;
    for (size_t l = 0; l < n_layers; ++l) {
        preacts[l] = params.weights[l] * activations[l] + params.biases[l];
        activations[l + 1] = (l + 1 < n_layers) ? preacts[l].cwiseMax(0.0).eval() : preacts[l];
    }

    // Flat offsets of each layer's weight block.
    std::vector<int> offsets(n_layers);
    int offset = 0;
    for (size_t l = 0; l < n_layers; ++l) {
        offsets[l] = offset;
        offset += static_cast<int>(params.weights[l].size() + params.biases[l].size());
    }
    if (flat_accum.size() != offset) {
        throw std::invalid_argument("backward: accumulator size mismatch");
    }

    Eigen::VectorXd delta = output_grad;
    for (size_t l = n_layers; l-- > 0;) {
        if (l + 1 < n_layers) {
            // ReLU derivative: 1 where the pre-activation is positive.
            delta = delta.cwiseProduct(
                (preacts[l].array() > 0.0).cast<double>().matrix());
        }
        const int out = static_cast<int>(params.weights[l].rows());
        const int in = static_cast<int>(params.weights[l].cols());
        // Weight block is row-major: dW(i, j) -> flat[offset + i * in + j].
        auto w_block = flat_accum.segment(offsets[l], out * in);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w_grad(
            w_block.data(), out, in);
        w_grad.noalias() += delta * activations[l].transpose();
        flat_accum.segment(offsets[l] + out * in, out) += delta;
        if (l > 0) {
            delta = (params.weights[l].transpose() * delta).eval();
        }
    }
}

Eigen::VectorXd backward(const MlpParams& params, const Eigen::VectorXd& input,
                         const Eigen::VectorXd& output_grad) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count(params.spec));
    backward_into(params, input, output_grad, grad);
    return grad;
}

Eigen::VectorXd flatten(const MlpParams& params) {
    Eigen::VectorXd flat(param_count(params.spec));
    int offset = 0;
    for (size_t l = 0; l < params.weights.size(); ++l) {
        const auto& w = params.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                flat(offset++) = w(i, j);
            }
        }
        for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
            flat(offset++) = params.biases[l](i);
        }
    }
    return flat;
}

void unflatten(const Eigen::VectorXd& flat, MlpParams& params) {
    if (flat.size() != param_count(params.spec)) {
        throw std::invalid_argument("unflatten: flat vector length mismatch");
    }
    int offset = 0;
    for (size_t l = 0; l < params.weights.size(); ++l) {
        auto& w = params.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = flat(offset++);
            }
        }
        for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
            params.biases[l](i) = flat(offset++);
        }
    }
}

AdamState make_adam(const MlpSpec& spec, double lr) {
    AdamState opt;
    const int n = param_count(spec);
    opt.m = Eigen::VectorXd::Zero(n);
    opt.v = Eigen::VectorXd::Zero(n);
    opt.lr = lr;
    return opt;
}

void adam_step(AdamState& opt, MlpParams& params, const Eigen::VectorXd& grad) {
    if (grad.size() != opt.m.size()) {
        throw std::invalid_argument("adam_step: gradient length mismatch");
    }
    if (!grad.allFinite()) {
        throw std::invalid_argument("adam_step: non-finite gradient, update refused");
    }
    opt.step += 1;
    opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grad;
    opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    Eigen::VectorXd flat = flatten(params);
    flat -= (opt.lr / bias1) * opt.m.cwiseQuotient(
                ((opt.v / bias2).cwiseSqrt().array() + opt.epsilon).matrix());
    unflatten(flat, params);
}

void hard_update(MlpParams& target, const MlpParams& online) {
    if (target.spec.layer_sizes != online.spec.layer_sizes) {
        throw std::invalid_argument("hard_update: spec mismatch");
    }
    target.weights = online.weights;
    target.biases = online.biases;
}

void save_checkpoint(const std::string& path, const MlpParams& params) {
    nlohmann::json header;
    header["layer_sizes"] = params.spec.layer_sizes;
    header["seed"] = params.spec.seed;
    header["hidden_activation"] = "relu";
    header["init"] = "he_uniform";

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    out << header.dump() << '\n';
    const Eigen::VectorXd flat = flatten(params);
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

MlpParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw std::runtime_error("load_checkpoint: missing header in " + path);
    }
    const nlohmann::json header = nlohmann::json::parse(header_line);
    MlpSpec spec;
    spec.layer_sizes = header.at("layer_sizes").get<std::vector<int>>();
    spec.seed = header.at("seed").get<uint64_t>();
    spec.validate();

    MlpParams params = make_mlp(spec);
    Eigen::VectorXd flat(param_count(spec));
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double))) {
        throw std::runtime_error("load_checkpoint: truncated parameter data in " + path);
    }
    unflatten(flat, params);
    return params;
}

}  // namespace qsc
