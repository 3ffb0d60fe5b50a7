#include "pentrl/mlp.hpp"

#include <cmath>
#include <random>

namespace pentrl::agent {

using nlohmann::json;

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw InvalidArgument("network needs at least input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw InvalidArgument("layer sizes must be positive");
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
    layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
}

void Mlp::init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& w = layers_[l].weight;
    const Eigen::Index rows = w.rows(), cols = w.cols();
    const bool tall = rows >= cols;
    Eigen::MatrixXd a(tall ? rows : cols, tall ? cols : rows);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    // Sign fix so the distribution is uniform over orthogonal matrices.
    Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    const double gain = l + 1 == layers_.size() ? output_gain : hidden_gain;
    w = gain * (tall ? q : Eigen::MatrixXd(q.transpose()));
    layers_[l].bias.setZero();
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

RowMatrix Mlp::forward(const Eigen::Ref<const RowMatrix>& input, Cache* cache) const {
  if (input.cols() != input_size()) throw InvalidArgument("network input width mismatch");
  // Observation rows are mostly never-executed (zero) history entries.
  const bool sparse = (input.array() != 0.0).count() * 4 < input.size();
  Eigen::SparseMatrix<double, Eigen::RowMajor> sp;
  if (sparse) sp = input.sparseView();
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(sparse ? RowMatrix() : RowMatrix(input));
    cache->sparse = sparse;
    cache->sparse_input = std::move(sp);
  }
  const auto& first = cache ? cache->sparse_input : sp;
  RowMatrix a;
  for (std::size_t l = 0;; ++l) {
    RowMatrix z;
    if (l == 0 && sparse)
      z = first * layers_[l].weight.transpose();
    else if (l == 0)
      z = input * layers_[l].weight.transpose();
    else
      z = (cache ? cache->activations.back() : a) * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    if (l + 1 == layers_.size()) return z;
    // Eigen's double tanh is scalar; the exp form vectorizes (abs error ~1e-16).
    z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
    if (cache)
      cache->activations.push_back(std::move(z));
    else
      a = std::move(z);
  }
}

void Mlp::backward(const Cache& cache, const Eigen::Ref<const RowMatrix>& grad_output, Mlp& grads) const {
  if (cache.activations.size() != layers_.size()) throw InvalidArgument("backward without a forward cache");
  RowMatrix delta = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads.layers_[l].bias.noalias() += delta.colwise().sum().transpose();
    if (l == 0 && cache.sparse) {
      grads.layers_[l].weight += (cache.sparse_input.transpose() * delta).transpose();
      break;
    }
    const RowMatrix& prev = cache.activations[l];
    grads.layers_[l].weight.noalias() += delta.transpose() * prev;
    if (l == 0) break;
    RowMatrix back = delta * layers_[l].weight;
    // tanh'(z) = 1 - tanh(z)^2, and prev holds tanh(z).
    delta = back.array() * (1.0 - prev.array().square());
  }
}

Mlp Mlp::zeros_like() const {
  Mlp z = *this;
  z.set_zero();
  return z;
}

void Mlp::set_zero() {
  for (auto& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) out.push_back(l.weight(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias(i));
  }
  return out;
}

void Mlp::unflatten(std::span<const double> p) {
  if (p.size() != parameter_count()) throw MismatchError("parameter vector length mismatch");
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = p[k++];
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = p[k++];
  }
}

bool Mlp::operator==(const Mlp& other) const { return sizes_ == other.sizes_ && flatten() == other.flatten(); }

json to_json(const Mlp& mlp) { return {{"sizes", mlp.sizes()}, {"params", mlp.flatten()}}; }

Mlp mlp_from_json(const json& j) {
  Mlp m(j.at("sizes").get<std::vector<int>>());
  auto params = j.at("params").get<std::vector<double>>();
  m.unflatten(params);
  return m;
}

}  // namespace pentrl::agent
