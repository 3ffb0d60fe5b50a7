#ifndef PENTRL_MLP_HPP_
#define PENTRL_MLP_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "pentrl/common.hpp"

namespace pentrl::agent {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fully connected network with tanh hidden layers and a linear head. Inputs
// are rows (one per URL); the same weights apply to every row.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  struct Cache {
    std::vector<RowMatrix> activations;  // input (empty when sparse), then each hidden layer
    Eigen::SparseMatrix<double, Eigen::RowMajor> sparse_input;
    bool sparse = false;
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  // Orthogonal init scaled by `hidden_gain`, head scaled by `output_gain`, zero biases.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  RowMatrix forward(const Eigen::Ref<const RowMatrix>& input, Cache* cache = nullptr) const;
  // Accumulates d(loss)/d(params) into `grads` (same shape as this network).
  void backward(const Cache& cache, const Eigen::Ref<const RowMatrix>& grad_output, Mlp& grads) const;

  Mlp zeros_like() const;
  void set_zero();

  // Flattened parameter order: per layer, weight row-major then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool operator==(const Mlp& other) const;

 private:
  std::vector<int> sizes_;
  std::vector<Layer> layers_;
};

nlohmann::json to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace pentrl::agent

#endif  // PENTRL_MLP_HPP_
