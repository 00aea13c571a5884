#include "so2frames/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace so2frames {

Eigen::MatrixXd init_uniform(Eigen::Index rows, Eigen::Index cols, int fan_in, RandomStream& rng) {
  const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

Mlp Mlp::create(const std::vector<int>& dims, RandomStream& rng, bool zero_last_bias) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp::create: need at least in and out dims");
  Mlp mlp;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    mlp.weights.push_back(init_uniform(dims[k + 1], dims[k], dims[k], rng));
    mlp.biases.push_back(init_uniform(dims[k + 1], 1, dims[k], rng));
  }
  if (zero_last_bias) mlp.biases.back().setZero();
  return mlp;
}

Mlp Mlp::zeros_like() const {
  Mlp z;
  for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
  return z;
}

void Mlp::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    f(prefix + ".w" + std::to_string(k), weights[k]);
    f(prefix + ".b" + std::to_string(k), biases[k]);
  }
}

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& x, MlpTape* tape) {
  if (x.size() != mlp.in_dim())
    throw std::invalid_argument("mlp input width " + std::to_string(x.size()) + ", expected " +
                                std::to_string(mlp.in_dim()));
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Eigen::VectorXd a = x;
  const std::size_t n = mlp.weights.size();
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXd z = mlp.weights[k] * a + mlp.biases[k].col(0);
    if (tape != nullptr) {
      tape->inputs.push_back(a);
      tape->pre.push_back(z);
    }
    if (k + 1 < n)
      a = z.unaryExpr([](double v) { return silu(v); });
    else
      a = std::move(z);
  }
  return a;
}

Eigen::VectorXd mlp_vjp(const Mlp& mlp, const MlpTape& tape, const Eigen::VectorXd& gout,
                        Mlp* grad) {
  const std::size_t n = mlp.weights.size();
  Eigen::VectorXd g = gout;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) g = g.cwiseProduct(tape.pre[k].unaryExpr([](double v) { return silu_grad(v); }));
    if (grad != nullptr) {
      grad->weights[k].noalias() += g * tape.inputs[k].transpose();
      grad->biases[k].col(0) += g;
    }
    g = mlp.weights[k].transpose() * g;
  }
  return g;
}

}  // namespace so2frames
