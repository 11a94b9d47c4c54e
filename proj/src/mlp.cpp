#include "swag/mlp.hpp"
#include "swag/random.hpp"

#include <cmath>
#include <stdexcept>

namespace swag {

Mlp::Mlp(int in_dim, int hidden_dim, int out_dim) : in_(in_dim), hidden_(hidden_dim), out_(out_dim) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) {
        throw std::invalid_argument("MLP dimensions must be positive");
    }
    std::size_t o = 0;
    o_w1_ = o;
    o += std::size_t(hidden_) * in_;
    o_b1_ = o;
    o += hidden_;
    o_w2_ = o;
    o += std::size_t(hidden_) * hidden_;
    o_b2_ = o;
    o += hidden_;
    o_w3_ = o;
    o += std::size_t(out_) * hidden_;
    o_b3_ = o;
    o += out_;
    params_.assign(o, 0.0);
}

void Mlp::initialize(std::uint64_t seed, const Eigen::VectorXd &output_bias) {
    std::fill(params_.begin(), params_.end(), 0.0);
    CounterRng rng(hash_key(seed, 0x31A7ull));
    const double bound1 = std::sqrt(6.0 / in_);
    for (std::size_t i = 0; i < std::size_t(hidden_) * in_; ++i) {
        params_[o_w1_ + i] = rng.uniform(-bound1, bound1);
    }
    const double bound2 = std::sqrt(6.0 / hidden_);
    for (std::size_t i = 0; i < std::size_t(hidden_) * hidden_; ++i) {
        params_[o_w2_ + i] = rng.uniform(-bound2, bound2);
    }
    for (int i = 0; i < out_ && i < output_bias.size(); ++i) {
        params_[o_b3_ + i] = output_bias[i];
    }
}

Mlp::Mat Mlp::forward(const Mat &input, Cache *cache) const {
    Mat pre1 = (w1() * input).colwise() + b1();
    Mat pre2 = (w2() * pre1.cwiseMax(0.0)).colwise() + b2();
    Mat out = (w3() * pre2.cwiseMax(0.0)).colwise() + b3();
    if (cache != nullptr) {
        cache->input = input;
        cache->pre1 = std::move(pre1);
        cache->pre2 = std::move(pre2);
    }
    return out;
}

Mlp::Mat Mlp::backward(const Cache &cache, const Mat &d_output, double *d_params) const {
    const Mat h1 = cache.pre1.cwiseMax(0.0);
    const Mat h2 = cache.pre2.cwiseMax(0.0);

    MatMap(d_params + o_w3_, out_, hidden_) += d_output * h2.transpose();
    Eigen::Map<Eigen::VectorXd>(d_params + o_b3_, out_) += d_output.rowwise().sum();

    Mat d_pre2 = w3().transpose() * d_output;
    d_pre2 = d_pre2.cwiseProduct((cache.pre2.array() > 0.0).cast<double>().matrix());
    MatMap(d_params + o_w2_, hidden_, hidden_) += d_pre2 * h1.transpose();
    Eigen::Map<Eigen::VectorXd>(d_params + o_b2_, hidden_) += d_pre2.rowwise().sum();

    Mat d_pre1 = w2().transpose() * d_pre2;
    d_pre1 = d_pre1.cwiseProduct((cache.pre1.array() > 0.0).cast<double>().matrix());
    MatMap(d_params + o_w1_, hidden_, in_) += d_pre1 * cache.input.transpose();
    Eigen::Map<Eigen::VectorXd>(d_params + o_b1_, hidden_) += d_pre1.rowwise().sum();

    return w1().transpose() * d_pre1;
}

} // namespace swag
