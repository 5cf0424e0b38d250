#include "evmarket/neuralnet.hpp"

#include <cmath>
#include <stdexcept>

#include "evmarket/rng.hpp"

namespace evmarket::nn {

namespace {

void check_input(const ModelParams& params, const Eigen::MatrixXd& X) {
    if (X.cols() != params.layers.front().weight.rows()) {
        throw std::invalid_argument("forward: input width mismatch");
    }
}

// Keep-mask with inverted-dropout scaling baked in: entries are either 0 or
// 1/(1-rate).
Eigen::ArrayXXd draw_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                          std::uint64_t seed) {
    Eigen::ArrayXXd mask(rows, cols);
    rng::Engine eng(seed);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            mask(r, c) = eng.uniform() < keep ? scale : 0.0;
        }
    }
    return mask;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> hidden;  // tanh outputs per hidden layer
    Eigen::ArrayXXd mask;                 // empty when dropout is off
    Eigen::MatrixXd last_input;           // input to the output layer
    Eigen::VectorXd output;
};

ForwardCache run_forward(const ModelParams& params, const Eigen::MatrixXd& X,
                         bool training, std::uint64_t mask_seed) {
    check_input(params, X);
    ForwardCache cache;
    const std::size_t n_layers = params.layers.size();
    Eigen::MatrixXd current = X;
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const auto& layer = params.layers[l];
        Eigen::MatrixXd z =
            (current * layer.weight).rowwise() + layer.bias;
        current = z.array().tanh();
        cache.hidden.push_back(current);
        if (l + 2 == n_layers && training && params.dropout_rate > 0.0) {
            cache.mask = draw_mask(current.rows(), current.cols(),
                                   params.dropout_rate, mask_seed);
            current = (current.array() * cache.mask).matrix();
        }
    }
    cache.last_input = current;
    const auto& out_layer = params.layers.back();
    cache.output =
        ((current * out_layer.weight).rowwise() + out_layer.bias).col(0);
    return cache;
}

}  // namespace

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.weight.size()) +
             static_cast<std::size_t>(l.bias.size());
    }
    return n;
}

nlohmann::ordered_json ModelParams::to_json() const {
    nlohmann::ordered_json j;
    j["dropout_rate"] = dropout_rate;
    std::vector<int> sizes;
    sizes.push_back(input_size());
    for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weight.cols()));
    j["layer_sizes"] = sizes;
    auto layers_json = nlohmann::ordered_json::array();
    for (const auto& l : layers) {
        nlohmann::ordered_json lj;
        auto w = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            auto row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) row.push_back(l.weight(r, c));
            w.push_back(std::move(row));
        }
        lj["weight"] = std::move(w);
        auto b = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < l.bias.cols(); ++c) b.push_back(l.bias(c));
        lj["bias"] = std::move(b);
        layers_json.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers_json);
    return j;
}

ModelParams ModelParams::from_json(const nlohmann::ordered_json& j) {
    ModelParams p;
    p.dropout_rate = j.at("dropout_rate").get<double>();
    for (const auto& lj : j.at("layers")) {
        Layer layer;
        const auto& w = lj.at("weight");
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = static_cast<Eigen::Index>(w.at(0).size());
        layer.weight.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                layer.weight(r, c) = w.at(static_cast<std::size_t>(r))
                                         .at(static_cast<std::size_t>(c))
                                         .get<double>();
            }
        }
        const auto& b = lj.at("bias");
        layer.bias.resize(static_cast<Eigen::Index>(b.size()));
        for (Eigen::Index c = 0; c < layer.bias.cols(); ++c) {
            layer.bias(c) = b.at(static_cast<std::size_t>(c)).get<double>();
        }
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        Layer z;
        z.weight = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
        z.bias = Eigen::RowVectorXd::Zero(l.bias.cols());
        g.layers.push_back(std::move(z));
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double s) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += s * other.layers[l].weight;
        layers[l].bias += s * other.layers[l].bias;
    }
}

void Gradients::scale(double s) {
    for (auto& l : layers) {
        l.weight *= s;
        l.bias *= s;
    }
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
        m = std::max(m, l.weight.cwiseAbs().maxCoeff());
        if (l.bias.size() > 0) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
    }
    return m;
}

ModelParams init_model(const std::vector<int>& layer_sizes, double dropout_rate,
                       std::uint64_t seed) {
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("init_model: need at least input and output sizes");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("init_model: dropout_rate must lie in [0, 1)");
    }
    ModelParams p;
    p.dropout_rate = dropout_rate;
    rng::Engine eng(rng::derive(seed, "init"));
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        Layer layer;
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        layer.weight.resize(fan_in, fan_out);
        for (Eigen::Index r = 0; r < fan_in; ++r) {
            for (Eigen::Index c = 0; c < fan_out; ++c) {
                layer.weight(r, c) = eng.uniform(-bound, bound);
            }
        }
        layer.bias = Eigen::RowVectorXd::Zero(fan_out);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Eigen::VectorXd forward(const ModelParams& params, const Eigen::MatrixXd& X) {
    return run_forward(params, X, false, 0).output;
}

Eigen::VectorXd forward(const ModelParams& params, const Eigen::MatrixXd& X,
                        bool training, std::uint64_t mask_seed) {
    return run_forward(params, X, training, mask_seed).output;
}

double loss(const ModelParams& params, const Eigen::MatrixXd& X,
            const Eigen::VectorXd& y) {
    if (X.rows() != y.rows()) throw std::invalid_argument("loss: shape mismatch");
    const Eigen::VectorXd out = forward(params, X);
    return (out - y).squaredNorm();
}

double training_loss(const ModelParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y, std::uint64_t mask_seed) {
    if (X.rows() != y.rows()) throw std::invalid_argument("loss: shape mismatch");
    const Eigen::VectorXd out = forward(params, X, true, mask_seed);
    return (out - y).squaredNorm();
}

Gradients gradient(const ModelParams& params, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, std::uint64_t mask_seed,
                   bool training) {
    if (X.rows() != y.rows()) throw std::invalid_argument("gradient: shape mismatch");
    const ForwardCache cache = run_forward(params, X, training, mask_seed);
    Gradients g = Gradients::zeros_like(params);

    const std::size_t n_layers = params.layers.size();
    // d(loss)/d(output), loss = sum of squared residuals.
    Eigen::MatrixXd delta = 2.0 * (cache.output - y);

    // Output layer.
    g.layers[n_layers - 1].weight = cache.last_input.transpose() * delta;
    g.layers[n_layers - 1].bias = delta.colwise().sum();

    Eigen::MatrixXd back = delta * params.layers[n_layers - 1].weight.transpose();

    for (std::size_t l = n_layers - 1; l-- > 0;) {
        const Eigen::MatrixXd& h = cache.hidden[l];  // tanh output, pre-dropout
        if (l + 2 == n_layers && cache.mask.size() > 0) {
            back = (back.array() * cache.mask).matrix();
        }
        // Through tanh.
        back = (back.array() * (1.0 - h.array().square())).matrix();
        const Eigen::MatrixXd& input =
            (l == 0) ? X : cache.hidden[l - 1];
        // The layer below the dropout point never sees the mask on its input
        // side: dropout sits after the final hidden layer only, so inputs to
        // layer l are the raw tanh outputs of layer l-1 for all hidden l.
        g.layers[l].weight = input.transpose() * back;
        g.layers[l].bias = back.colwise().sum();
        if (l > 0) back = back * params.layers[l].weight.transpose();
    }
    return g;
}

AdamState init_adam(const ModelParams& params, double beta1, double beta2,
                    double learning_rate, double epsilon) {
    AdamState s;
    s.first_moment = Gradients::zeros_like(params);
    s.second_moment = Gradients::zeros_like(params);
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.learning_rate = learning_rate;
    s.epsilon = epsilon;
    s.step = 0;
    return s;
}

void adam_step(AdamState& state, ModelParams& params, const Gradients& grad) {
    const long t = state.step + 1;
    const double step_size = state.learning_rate *
                             std::sqrt(1.0 - std::pow(state.beta2, t)) /
                             (1.0 - std::pow(state.beta1, t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& m = state.first_moment.layers[l];
        auto& v = state.second_moment.layers[l];
        const auto& g = grad.layers[l];
        m.weight = state.beta1 * m.weight + (1.0 - state.beta1) * g.weight;
        m.bias = state.beta1 * m.bias + (1.0 - state.beta1) * g.bias;
        v.weight = state.beta2 * v.weight.array().matrix() +
                   (1.0 - state.beta2) * g.weight.array().square().matrix();
        v.bias = state.beta2 * v.bias.array().matrix() +
                 (1.0 - state.beta2) * g.bias.array().square().matrix();
        params.layers[l].weight.array() -=
            step_size * m.weight.array() / (v.weight.array().sqrt() + state.epsilon);
        params.layers[l].bias.array() -=
            step_size * m.bias.array() / (v.bias.array().sqrt() + state.epsilon);
    }
    state.step = t;
}

}  // namespace evmarket::nn
