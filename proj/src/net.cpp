#include "proto_ope/net.hpp"

#include <cmath>

namespace proto_ope {

Mat Standardizer::apply(const Mat& rows) const {
  if (rows.cols() != mean.size())
    throw std::invalid_argument("Standardizer::apply: feature dimension differs");
  return (rows.rowwise() - mean.transpose()).array().rowwise() * scale.transpose().array();
}

Standardizer Standardizer::fit(const Mat& rows) {
  if (rows.rows() < 1) throw std::invalid_argument("Standardizer::fit: empty data");
  Standardizer s;
  s.mean = rows.colwise().mean();
  Mat centered = rows.rowwise() - s.mean.transpose();
  Vec var = centered.array().square().colwise().mean();
  s.scale = Vec::Ones(rows.cols());
  for (Eigen::Index i = 0; i < var.size(); ++i)
    if (var[i] > 1e-12) s.scale[i] = 1.0 / std::sqrt(var[i]);
  return s;
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = Vec::Zero(dim);
  s.scale = Vec::Ones(dim);
  return s;
}

const char* to_string(EncoderKind k) {
  return k == EncoderKind::feedforward ? "feedforward" : "recurrent";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "feedforward" || s == "ffn") return EncoderKind::feedforward;
  if (s == "recurrent" || s == "rnn") return EncoderKind::recurrent;
  throw ConfigError("unknown encoder kind '" + s + "'");
}

namespace {

Mat glorot_uniform(int rows, int cols, Rng& rng) {
  double bound = std::sqrt(6.0 / (rows + cols));
  Mat w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

Params init_encoder_params(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.input_dim <= 0) throw std::invalid_argument("encoder: input_dim must be positive");
  Params p;
  if (cfg.kind == EncoderKind::feedforward) {
    p["enc.w1"] = glorot_uniform(cfg.hidden, cfg.input_dim, rng);
    p["enc.b1"] = Mat::Zero(cfg.hidden, 1);
    p["enc.w2"] = glorot_uniform(cfg.latent, cfg.hidden, rng);
    p["enc.b2"] = Mat::Zero(cfg.latent, 1);
  } else {
    p["enc.w1"] = glorot_uniform(cfg.hidden, cfg.input_dim + cfg.hidden, rng);
    p["enc.b1"] = Mat::Zero(cfg.hidden, 1);
    p["enc.w2"] = glorot_uniform(cfg.latent, cfg.hidden + cfg.latent, rng);
    p["enc.b2"] = Mat::Zero(cfg.latent, 1);
  }
  return p;
}

int token_dim(int feature_dim, int n_actions) { return feature_dim + n_actions; }

Vec make_token(const Trajectory& tr, int t, const Mat& features_std, int n_actions) {
  if (t < 0 || t >= tr.length()) throw std::invalid_argument("make_token: time out of range");
  const int d = static_cast<int>(features_std.cols());
  Vec token = Vec::Zero(d + n_actions);
  token.head(d) = features_std.row(tr.contexts[t]).transpose();
  if (t > 0) token[d + tr.actions[t - 1]] = 1.0;
  return token;
}

BatchInputs build_inputs(const TrajectoryDataset& data, const Mat& features_std, int n_actions,
                         std::span<const SubseqRef> samples, EncoderKind kind) {
  BatchInputs in;
  in.m = static_cast<int>(samples.size());
  const int dim = token_dim(static_cast<int>(features_std.cols()), n_actions);
  in.last_tokens = Mat::Zero(dim, in.m);
  int max_len = 0;
  for (int i = 0; i < in.m; ++i) {
    const auto& ref = samples[i];
    const Trajectory& tr = data.items.at(ref.traj);
    in.last_tokens.col(i) = make_token(tr, ref.t, features_std, n_actions);
    max_len = std::max(max_len, ref.t + 1);
  }
  if (kind == EncoderKind::recurrent) {
    in.step_tokens.assign(max_len, Mat::Zero(dim, in.m));
    in.active.assign(max_len, std::vector<char>(in.m, 0));
    for (int i = 0; i < in.m; ++i) {
      const auto& ref = samples[i];
      const Trajectory& tr = data.items.at(ref.traj);
      for (int s = 0; s <= ref.t; ++s) {
        in.step_tokens[s].col(i) = make_token(tr, s, features_std, n_actions);
        in.active[s][i] = 1;
      }
    }
  }
  return in;
}

ad::Var encode_batch(ad::Tape& tape, const EncoderConfig& cfg, const VarMap& params,
                     const BatchInputs& inputs) {
  auto p = [&](const char* name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument(std::string("encoder: missing parameter ") + name);
    return it->second;
  };
  if (cfg.kind == EncoderKind::feedforward) {
    ad::Var x = tape.input(inputs.last_tokens);
    ad::Var h1 = tape.relu(tape.add_bias(tape.matmul(p("enc.w1"), x), p("enc.b1")));
    return tape.relu(tape.add_bias(tape.matmul(p("enc.w2"), h1), p("enc.b2")));
  }
  const int m = inputs.m;
  ad::Var h1 = tape.input(Mat::Zero(cfg.hidden, m));
  ad::Var h2 = tape.input(Mat::Zero(cfg.latent, m));
  for (std::size_t s = 0; s < inputs.step_tokens.size(); ++s) {
    ad::Var x = tape.input(inputs.step_tokens[s]);
    ad::Var h1f = tape.tanh(tape.add_bias(tape.matmul(p("enc.w1"), tape.vconcat(x, h1)), p("enc.b1")));
    h1 = tape.where_cols(h1f, h1, inputs.active[s]);
    ad::Var h2f = tape.tanh(tape.add_bias(tape.matmul(p("enc.w2"), tape.vconcat(h1, h2)), p("enc.b2")));
    h2 = tape.where_cols(h2f, h2, inputs.active[s]);
  }
  return h2;
}

Mat encode_plain(const EncoderConfig& cfg, const Params& params, const BatchInputs& inputs) {
  auto p = [&](const char* name) -> const Mat& {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument(std::string("encoder: missing parameter ") + name);
    return it->second;
  };
  if (cfg.kind == EncoderKind::feedforward) {
    Mat h1 = ((p("enc.w1") * inputs.last_tokens).colwise() + Vec(p("enc.b1").col(0))).cwiseMax(0.0);
    return ((p("enc.w2") * h1).colwise() + Vec(p("enc.b2").col(0))).cwiseMax(0.0);
  }
  const int m = inputs.m;
  Mat h1 = Mat::Zero(cfg.hidden, m);
  Mat h2 = Mat::Zero(cfg.latent, m);
  Mat cat1(p("enc.w1").cols(), m);
  Mat cat2(p("enc.w2").cols(), m);
  for (std::size_t s = 0; s < inputs.step_tokens.size(); ++s) {
    cat1.topRows(inputs.step_tokens[s].rows()) = inputs.step_tokens[s];
    cat1.bottomRows(cfg.hidden) = h1;
    Mat h1f = ((p("enc.w1") * cat1).colwise() + Vec(p("enc.b1").col(0))).array().tanh().matrix();
    for (int i = 0; i < m; ++i)
      if (inputs.active[s][i]) h1.col(i) = h1f.col(i);
    cat2.topRows(cfg.hidden) = h1;
    cat2.bottomRows(cfg.latent) = h2;
    Mat h2f = ((p("enc.w2") * cat2).colwise() + Vec(p("enc.b2").col(0))).array().tanh().matrix();
    for (int i = 0; i < m; ++i)
      if (inputs.active[s][i]) h2.col(i) = h2f.col(i);
  }
  return h2;
}

Vec encode_single(const EncoderConfig& cfg, const Params& params, const Trajectory& tr, int t,
                  const Mat& features_std, int n_actions) {
  TrajectoryDataset view;
  view.items.push_back(tr);
  view.n_states = static_cast<int>(features_std.rows());
  view.n_actions = n_actions;
  SubseqRef ref{0, t};
  BatchInputs in = build_inputs(view, features_std, n_actions, std::span(&ref, 1), cfg.kind);
  return encode_plain(cfg, params, in).col(0);
}

LossGrad loss_and_grad(const Params& params,
                       const std::function<ad::Var(ad::Tape&, const VarMap&)>& objective) {
  ad::Tape tape;
  VarMap vars;
  for (const auto& [name, value] : params) vars[name] = tape.input(value);
  ad::Var loss = objective(tape, vars);
  if (tape.value(loss).size() != 1)
    throw std::invalid_argument("loss_and_grad: objective must return a scalar");
  double loss_value = tape.value(loss)(0, 0);
  if (!std::isfinite(loss_value))
    throw NumericError("loss_and_grad: objective evaluated to a non-finite value");
  tape.backward(loss);
  LossGrad out;
  out.loss = loss_value;
  for (const auto& [name, var] : vars) {
    const Mat& g = tape.grad(var);
    if (!g.allFinite())
      throw NumericError("loss_and_grad: non-finite gradient for parameter '" + name + "'");
    out.grads[name] = g;
  }
  return out;
}

void adam_update(Params& params, const std::map<std::string, Mat>& grads, AdamState& state,
                 const AdamConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("adam_update: missing gradient for parameter '" + name + "'");
    const Mat& g = git->second;
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw std::invalid_argument("adam_update: gradient shape differs for parameter '" + name + "'");
    Mat& m = state.m.try_emplace(name, Mat::Zero(theta.rows(), theta.cols())).first->second;
    Mat& v = state.v.try_emplace(name, Mat::Zero(theta.rows(), theta.cols())).first->second;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Mat m_hat = m / bc1;
    Mat v_hat = v / bc2;
    Mat update = cfg.learning_rate *
                 (m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon) +
                  cfg.weight_decay * theta.array())
                     .matrix();
    theta -= update;
  }
}

}  // namespace proto_ope
