#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace swag {

/// Fully connected network: in -> hidden (ReLU) -> hidden (ReLU) -> out.
/// All weights and biases live in one flat parameter vector so a single
/// optimizer state covers the whole network.
class Mlp {
  public:
    Mlp() : Mlp(51, 64, 4) {}
    Mlp(int in_dim, int hidden_dim, int out_dim);

    int in_dim() const { return in_; }
    int hidden_dim() const { return hidden_; }
    int out_dim() const { return out_; }

    std::vector<double> &params() { return params_; }
    const std::vector<double> &params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    using Mat = Eigen::MatrixXd;
    using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
    using MatMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

    ConstMatMap w1() const { return {params_.data() + o_w1_, hidden_, in_}; }
    ConstVecMap b1() const { return {params_.data() + o_b1_, hidden_}; }
    ConstMatMap w2() const { return {params_.data() + o_w2_, hidden_, hidden_}; }
    ConstVecMap b2() const { return {params_.data() + o_b2_, hidden_}; }
    ConstMatMap w3() const { return {params_.data() + o_w3_, out_, hidden_}; }
    ConstVecMap b3() const { return {params_.data() + o_b3_, out_}; }

    // Kaiming-uniform hidden layers, zero output weights, given output bias.
    void initialize(std::uint64_t seed, const Eigen::VectorXd &output_bias);

    struct Cache {
        Mat input;  // in x B
        Mat pre1;   // hidden x B
        Mat pre2;   // hidden x B
    };

    /// Forward over a batch of column vectors. Returns out x B.
    Mat forward(const Mat &input, Cache *cache = nullptr) const;

    /// Backward for a batch. Adds parameter gradients into `d_params`
    /// (length param_count()) and returns dL/dinput.
    Mat backward(const Cache &cache, const Mat &d_output, double *d_params) const;

  private:
    int in_, hidden_, out_;
    std::size_t o_w1_, o_b1_, o_w2_, o_b2_, o_w3_, o_b3_;
    std::vector<double> params_;
};

} // namespace swag
