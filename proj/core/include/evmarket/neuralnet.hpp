// From-scratch feedforward regression network: tanh hidden layers, one
// inverted-dropout layer after the final hidden layer, linear output,
// sum-of-squares loss with analytic backprop, and Adam with the
// bias-corrected step size folded into the learning rate.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace evmarket::nn {

struct Layer {
    Eigen::MatrixXd weight;   // in x out
    Eigen::RowVectorXd bias;  // 1 x out
};

struct ModelParams {
    std::vector<Layer> layers;       // hidden layers then linear output layer
    double dropout_rate = 0.0;       // fraction dropped after final hidden layer

    int input_size() const { return static_cast<int>(layers.front().weight.rows()); }
    int output_size() const { return static_cast<int>(layers.back().weight.cols()); }
    std::size_t layer_count() const { return layers.size(); }
    std::size_t scalar_count() const;

    nlohmann::ordered_json to_json() const;
    static ModelParams from_json(const nlohmann::ordered_json& j);
};

// Gradient (or moment accumulator) with the same shape as a ModelParams.
struct Gradients {
    std::vector<Layer> layers;

    static Gradients zeros_like(const ModelParams& params);
    void add_scaled(const Gradients& other, double scale);
    void scale(double s);
    double max_abs() const;
};

// layer_sizes = {input, hidden..., output}; weights uniform in
// [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
ModelParams init_model(const std::vector<int>& layer_sizes, double dropout_rate,
                       std::uint64_t seed);

// Inference pass: dropout disabled, deterministic in (params, X).
Eigen::VectorXd forward(const ModelParams& params, const Eigen::MatrixXd& X);

// Training pass: inverted-dropout mask drawn from mask_seed and applied after
// the final hidden layer.
Eigen::VectorXd forward(const ModelParams& params, const Eigen::MatrixXd& X,
                        bool training, std::uint64_t mask_seed);

// Sum of squared residuals (not the mean); dropout disabled.
double loss(const ModelParams& params, const Eigen::MatrixXd& X,
            const Eigen::VectorXd& y);

// Same loss evaluated through the dropout mask drawn from mask_seed; this is
// the exact function whose gradient the training pass computes.
double training_loss(const ModelParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y, std::uint64_t mask_seed);

// Analytic gradient of the (masked) sum-of-squares loss. The mask drawn from
// mask_seed matches the corresponding forward pass exactly.
Gradients gradient(const ModelParams& params, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, std::uint64_t mask_seed,
                   bool training = true);

struct AdamState {
    Gradients first_moment;   // exponential moving average of the gradient
    Gradients second_moment;  // exponential moving average of its square
    double beta1 = 0.9;
    double beta2 = 0.999;
    double learning_rate = 0.01;
    double epsilon = 1e-8;
    long step = 0;  // completed update count
};

AdamState init_adam(const ModelParams& params, double beta1 = 0.9,
                    double beta2 = 0.999, double learning_rate = 0.01,
                    double epsilon = 1e-8);

// One update: moment decay, step size scaled by
// sqrt(1 - beta2^(t+1)) / (1 - beta1^(t+1)), then
// params -= step_size * m / (sqrt(v) + epsilon).
void adam_step(AdamState& state, ModelParams& params, const Gradients& grad);

}  // namespace evmarket::nn
