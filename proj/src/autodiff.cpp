#include "proto_ope/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace proto_ope::ad {

Var Tape::emplace(Mat value, std::function<void(Tape&)> back) {
  Node node;
  node.grad = Mat::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Mat value) { return emplace(std::move(value), {}); }

Var Tape::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Var out = emplace(av * bv, {});
  nodes_[out.idx].back = [a, b, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.grad_mut(a).noalias() += g * t.value(b).transpose();
    t.grad_mut(b).noalias() += t.value(a).transpose() * g;
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw std::invalid_argument("add: shapes differ");
  Var out = emplace(value(a) + value(b), {});
  nodes_[out.idx].back = [a, b, out](Tape& t) {
    t.grad_mut(a) += t.grad(out);
    t.grad_mut(b) += t.grad(out);
  };
  return out;
}

Var Tape::add_bias(Var m, Var bias) {
  if (value(bias).cols() != 1 || value(bias).rows() != value(m).rows())
    throw std::invalid_argument("add_bias: bias must be a column vector matching rows");
  Var out = emplace(value(m).colwise() + Eigen::VectorXd(value(bias).col(0)), {});
  nodes_[out.idx].back = [m, bias, out](Tape& t) {
    t.grad_mut(m) += t.grad(out);
    t.grad_mut(bias) += t.grad(out).rowwise().sum();
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw std::invalid_argument("sub: shapes differ");
  Var out = emplace(value(a) - value(b), {});
  nodes_[out.idx].back = [a, b, out](Tape& t) {
    t.grad_mut(a) += t.grad(out);
    t.grad_mut(b) -= t.grad(out);
  };
  return out;
}

Var Tape::scale(Var a, double c) {
  Var out = emplace(value(a) * c, {});
  nodes_[out.idx].back = [a, c, out](Tape& t) { t.grad_mut(a) += c * t.grad(out); };
  return out;
}

Var Tape::relu(Var a) {
  Var out = emplace(value(a).cwiseMax(0.0), {});
  nodes_[out.idx].back = [a, out](Tape& t) {
    t.grad_mut(a).array() += t.grad(out).array() * (t.value(a).array() > 0.0).cast<double>();
  };
  return out;
}

Var Tape::tanh(Var a) {
  Var out = emplace(value(a).array().tanh().matrix(), {});
  nodes_[out.idx].back = [a, out](Tape& t) {
    t.grad_mut(a).array() += t.grad(out).array() * (1.0 - t.value(out).array().square());
  };
  return out;
}

Var Tape::sum(Var a) {
  Mat s(1, 1);
  s(0, 0) = value(a).sum();
  Var out = emplace(std::move(s), {});
  nodes_[out.idx].back = [a, out](Tape& t) {
    t.grad_mut(a).array() += t.grad(out)(0, 0);
  };
  return out;
}

Var Tape::vconcat(Var top, Var bottom) {
  if (value(top).cols() != value(bottom).cols())
    throw std::invalid_argument("vconcat: column counts differ");
  Mat v(value(top).rows() + value(bottom).rows(), value(top).cols());
  v.topRows(value(top).rows()) = value(top);
  v.bottomRows(value(bottom).rows()) = value(bottom);
  Var out = emplace(std::move(v), {});
  const auto top_rows = value(top).rows();
  nodes_[out.idx].back = [top, bottom, out, top_rows](Tape& t) {
    const Mat& g = t.grad(out);
    t.grad_mut(top) += g.topRows(top_rows);
    t.grad_mut(bottom) += g.bottomRows(g.rows() - top_rows);
  };
  return out;
}

Var Tape::where_cols(Var fresh, Var prev, const std::vector<char>& active) {
  const Mat& fv = value(fresh);
  const Mat& pv = value(prev);
  if (fv.rows() != pv.rows() || fv.cols() != pv.cols())
    throw std::invalid_argument("where_cols: shapes differ");
  if (static_cast<Eigen::Index>(active.size()) != fv.cols())
    throw std::invalid_argument("where_cols: mask length differs from column count");
  Mat v = pv;
  for (Eigen::Index c = 0; c < fv.cols(); ++c)
    if (active[c]) v.col(c) = fv.col(c);
  Var out = emplace(std::move(v), {});
  nodes_[out.idx].back = [fresh, prev, out, active](Tape& t) {
    const Mat& g = t.grad(out);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (active[c])
        t.grad_mut(fresh).col(c) += g.col(c);
      else
        t.grad_mut(prev).col(c) += g.col(c);
    }
  };
  return out;
}

Var Tape::pairwise_sqdist(Var z, Var e) {
  const Mat& zv = value(z);
  const Mat& ev = value(e);
  if (zv.rows() != ev.rows()) throw std::invalid_argument("pairwise_sqdist: dimensions differ");
  Eigen::VectorXd zn = zv.colwise().squaredNorm();
  Eigen::VectorXd en = ev.colwise().squaredNorm();
  Mat d2 = (-2.0 * zv.transpose() * ev);
  d2.colwise() += zn;
  d2.rowwise() += en.transpose();
  d2 = d2.cwiseMax(0.0);  // guard round-off
  Var out = emplace(std::move(d2), {});
  nodes_[out.idx].back = [z, e, out](Tape& t) {
    const Mat& g = t.grad(out);  // n x m
    const Mat& zv = t.value(z);
    const Mat& ev = t.value(e);
    // d D2(j,i) / dz_j = 2 (z_j - e_i);  d D2(j,i) / de_i = -2 (z_j - e_i)
    Eigen::VectorXd row_sum = g.rowwise().sum();
    Eigen::VectorXd col_sum = g.colwise().sum().transpose();
    t.grad_mut(z).noalias() += 2.0 * (zv * row_sum.asDiagonal() - ev * g.transpose());
    t.grad_mut(e).noalias() += 2.0 * (ev * col_sum.asDiagonal() - zv * g);
  };
  return out;
}

Var Tape::exp_neg(Var a) {
  Var out = emplace((-value(a).array()).exp().matrix(), {});
  nodes_[out.idx].back = [a, out](Tape& t) {
    t.grad_mut(a).array() -= t.grad(out).array() * t.value(out).array();
  };
  return out;
}

Var Tape::nll_softmax(Var logits, std::vector<int> labels) {
  const Mat& lv = value(logits);
  const auto m = lv.cols();
  if (static_cast<Eigen::Index>(labels.size()) != m)
    throw std::invalid_argument("nll_softmax: one label per column required");
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (labels[i] < 0 || labels[i] >= lv.rows())
      throw std::invalid_argument("nll_softmax: label out of range");
    double mx = lv.col(i).maxCoeff();
    double lse = mx + std::log((lv.col(i).array() - mx).exp().sum());
    total += lse - lv(labels[i], i);
  }
  Mat v(1, 1);
  v(0, 0) = total / static_cast<double>(m);
  Var out = emplace(std::move(v), {});
  nodes_[out.idx].back = [logits, out, labels = std::move(labels)](Tape& t) {
    const Mat& lv = t.value(logits);
    double g = t.grad(out)(0, 0) / static_cast<double>(lv.cols());
    Mat& dst = t.grad_mut(logits);
    for (Eigen::Index i = 0; i < lv.cols(); ++i) {
      double mx = lv.col(i).maxCoeff();
      Eigen::VectorXd p = (lv.col(i).array() - mx).exp();
      p /= p.sum();
      dst.col(i) += g * p;
      dst(labels[i], i) -= g;
    }
  };
  return out;
}

Var Tape::colwise_min_sum(Var a) {
  const Mat& av = value(a);
  std::vector<Eigen::Index> argmin(av.cols());
  double total = 0.0;
  for (Eigen::Index c = 0; c < av.cols(); ++c) {
    Eigen::Index r;
    total += av.col(c).minCoeff(&r);
    argmin[c] = r;
  }
  Mat v(1, 1);
  v(0, 0) = total;
  Var out = emplace(std::move(v), {});
  nodes_[out.idx].back = [a, out, argmin = std::move(argmin)](Tape& t) {
    double g = t.grad(out)(0, 0);
    Mat& dst = t.grad_mut(a);
    for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(argmin[c], c) += g;
  };
  return out;
}

Var Tape::rowwise_min_sum(Var a) {
  const Mat& av = value(a);
  std::vector<Eigen::Index> argmin(av.rows());
  double total = 0.0;
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    Eigen::Index c;
    total += av.row(r).minCoeff(&c);
    argmin[r] = c;
  }
  Mat v(1, 1);
  v(0, 0) = total;
  Var out = emplace(std::move(v), {});
  nodes_[out.idx].back = [a, out, argmin = std::move(argmin)](Tape& t) {
    double g = t.grad(out)(0, 0);
    Mat& dst = t.grad_mut(a);
    for (Eigen::Index r = 0; r < dst.rows(); ++r) dst(r, argmin[r]) += g;
  };
  return out;
}

Var Tape::hinge_diversity(Var z, double d_min) {
  const Mat& zv = value(z);
  const auto n = zv.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = (zv.col(i) - zv.col(j)).norm();
      double slack = d_min - d;
      if (slack > 0.0) total += slack * slack;
    }
  }
  Mat v(1, 1);
  v(0, 0) = total;
  Var out = emplace(std::move(v), {});
  nodes_[out.idx].back = [z, out, d_min](Tape& t) {
    double g = t.grad(out)(0, 0);
    const Mat& zv = t.value(z);
    Mat& dst = t.grad_mut(z);
    for (Eigen::Index i = 0; i < zv.cols(); ++i) {
      for (Eigen::Index j = i + 1; j < zv.cols(); ++j) {
        Eigen::VectorXd diff = zv.col(i) - zv.col(j);
        double d = diff.norm();
        double slack = d_min - d;
        if (slack <= 0.0 || d < 1e-12) continue;
        Eigen::VectorXd dd = (-2.0 * slack / d) * diff;
        dst.col(i) += g * dd;
        dst.col(j) -= g * dd;
      }
    }
  };
  return out;
}

void Tape::backward(Var out, const Mat& seed) {
  if (!out.valid()) throw std::invalid_argument("backward: invalid variable");
  Node& last = nodes_[out.idx];
  if (seed.rows() != last.value.rows() || seed.cols() != last.value.cols())
    throw std::invalid_argument("backward: seed shape differs from output");
  last.grad += seed;
  for (int i = out.idx; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

void Tape::backward(Var out) {
  if (value(out).size() != 1)
    throw std::invalid_argument("backward: output must be scalar (or pass a seed)");
  backward(out, Mat::Ones(1, 1));
}

bool Tape::all_values_finite() const {
  for (const Node& n : nodes_)
    if (!n.value.allFinite()) return false;
  return true;
}

void Tape::zero_grads() {
  for (Node& n : nodes_) n.grad.setZero();
}

}  // namespace proto_ope::ad
