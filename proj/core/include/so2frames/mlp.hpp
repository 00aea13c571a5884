#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "so2frames/random.hpp"

namespace so2frames {

/// Visitor over named parameter arrays. Biases are stored as n x 1 matrices so
/// every parameter is a MatrixXd.
using ParamVisitor = std::function<void(const std::string&, Eigen::MatrixXd&)>;

/// Initialization shared by every learned array: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Eigen::MatrixXd init_uniform(Eigen::Index rows, Eigen::Index cols, int fan_in, RandomStream& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

/// Fully connected network, SiLU between layers, linear output.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // layer k: out_k x in_k
  std::vector<Eigen::MatrixXd> biases;   // layer k: out_k x 1

  /// dims = {in, hidden..., out}. With zero_last_bias the output bias starts at 0.
  static Mlp create(const std::vector<int>& dims, RandomStream& rng, bool zero_last_bias = false);
  /// Same shapes, all zeros (gradient accumulator).
  Mlp zeros_like() const;

  int in_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int out_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  void visit(const std::string& prefix, const ParamVisitor& f);
};

struct MlpTape {
  std::vector<Eigen::VectorXd> inputs;  // input to each layer
  std::vector<Eigen::VectorXd> pre;     // pre-activation of each layer
};

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& x, MlpTape* tape = nullptr);

/// Returns the input gradient; parameter gradients are added into `grad` when
/// it is non-null.
Eigen::VectorXd mlp_vjp(const Mlp& mlp, const MlpTape& tape, const Eigen::VectorXd& gout,
                        Mlp* grad);

}  // namespace so2frames
