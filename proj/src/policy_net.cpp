#include "kkv/policy_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "kkv/faults.hpp"

namespace kkv {

namespace {

constexpr char kMagic[4] = {'K', 'K', 'V', 'W'};
constexpr std::uint32_t kFormatVersion = 1;

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

void init_tensor(Eigen::MatrixXd& m, int fan_in, RngStream& rng) {
  const double bound = std::sqrt(1.0 / std::max(1, fan_in));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
  }
}

}  // namespace

void NetParams::resize(const NetworkDims& d) {
  dims = d;
  w1.resize(d.h1, d.in);
  b1.resize(d.h1, 1);
  wz.resize(d.h2, d.h1);
  uz.resize(d.h2, d.h2);
  bz.resize(d.h2, 1);
  wr.resize(d.h2, d.h1);
  ur.resize(d.h2, d.h2);
  br.resize(d.h2, 1);
  wh.resize(d.h2, d.h1);
  uh.resize(d.h2, d.h2);
  bh.resize(d.h2, 1);
  w3.resize(d.h3, d.h2);
  b3.resize(d.h3, 1);
  w4.resize(d.out, d.h3);
  b4.resize(d.out, 1);
}

void NetParams::set_zero() {
  for_each([](const char*, Eigen::MatrixXd& m) { m.setZero(); });
}

void NetParams::init(RngStream& rng) {
  init_tensor(w1, dims.in, rng);
  init_tensor(b1, dims.in, rng);
  init_tensor(wz, dims.h1, rng);
  init_tensor(uz, dims.h2, rng);
  init_tensor(bz, dims.h1, rng);
  init_tensor(wr, dims.h1, rng);
  init_tensor(ur, dims.h2, rng);
  init_tensor(br, dims.h1, rng);
  init_tensor(wh, dims.h1, rng);
  init_tensor(uh, dims.h2, rng);
  init_tensor(bh, dims.h1, rng);
  init_tensor(w3, dims.h2, rng);
  init_tensor(b3, dims.h2, rng);
  init_tensor(w4, dims.h3, rng);
  init_tensor(b4, dims.h3, rng);
}

void ForwardTrace::resize(const NetworkDims& d, int steps) {
  a1.resize(d.h1, steps);
  z.resize(d.h2, steps);
  r.resize(d.h2, steps);
  hc.resize(d.h2, steps);
  h.resize(d.h2, steps);
  a3.resize(d.h3, steps);
  out.resize(d.out, steps);
}

NetworkParams NetworkParams::make(int obs_dim, int act_dim, std::uint64_t seed) {
  NetworkParams np;
  np.obs_dim = obs_dim;
  np.act_dim = act_dim;
  np.policy.resize(NetworkDims::policy(obs_dim, act_dim));
  np.value.resize(NetworkDims::value(obs_dim));
  RngStream rng(seed, 0xB0075);
  np.policy.init(rng);
  np.value.init(rng);
  // Start near-quiescent: bias the fire logits so the initial policy
  // commands each group ~18% of the time instead of 50%. Simultaneous
  // opposed divert pairs cancel exactly, so a half-on policy drains the
  // tank with no dynamic trace and optimization stalls on that plateau.
  for (int i = 0; i < act_dim; ++i) np.policy.b4(2 * i + 1, 0) -= 1.5;
  return np;
}

Eigen::VectorXd net_forward(const NetParams& p, const Eigen::VectorXd& input,
                            Eigen::VectorXd& hidden) {
  if (input.size() != p.dims.in) throw ConfigFault("net_forward: input dimension mismatch");
  if (hidden.size() != p.dims.h2) throw ConfigFault("net_forward: hidden dimension mismatch");
  const Eigen::VectorXd a1 = ((p.w1 * input + p.b1).array().tanh()).matrix();
  const Eigen::ArrayXd z = sigmoid((p.wz * a1 + p.uz * hidden + p.bz).array());
  const Eigen::ArrayXd r = sigmoid((p.wr * a1 + p.ur * hidden + p.br).array());
  const Eigen::VectorXd rh = (r * hidden.array()).matrix();
  const Eigen::ArrayXd hc = (p.wh * a1 + p.uh * rh + p.bh).array().tanh();
  hidden = ((1.0 - z) * hidden.array() + z * hc).matrix();
  const Eigen::VectorXd a3 = ((p.w3 * hidden + p.b3).array().tanh()).matrix();
  return p.w4 * a3 + p.b4;
}

void net_forward_sequence(const NetParams& p, const Eigen::MatrixXd& obs, ForwardTrace& trace) {
  const int steps = static_cast<int>(obs.rows());
  if (obs.cols() != p.dims.in) throw ConfigFault("net_forward_sequence: input dimension mismatch");
  trace.resize(p.dims, steps);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(p.dims.h2);
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd x = obs.row(t).transpose();
    trace.a1.col(t).noalias() = p.w1 * x + p.b1;
    trace.a1.col(t) = trace.a1.col(t).array().tanh().matrix();
    const auto a1 = trace.a1.col(t);
    trace.z.col(t) = sigmoid((p.wz * a1 + p.uz * h + p.bz).array()).matrix();
    trace.r.col(t) = sigmoid((p.wr * a1 + p.ur * h + p.br).array()).matrix();
    const Eigen::VectorXd rh = (trace.r.col(t).array() * h.array()).matrix();
    trace.hc.col(t) = ((p.wh * a1 + p.uh * rh + p.bh).array().tanh()).matrix();
    h = ((1.0 - trace.z.col(t).array()) * h.array() +
         trace.z.col(t).array() * trace.hc.col(t).array())
            .matrix();
    trace.h.col(t) = h;
    trace.a3.col(t) = ((p.w3 * h + p.b3).array().tanh()).matrix();
    trace.out.col(t).noalias() = p.w4 * trace.a3.col(t) + p.b4;
  }
}

ActionDistribution ActionDistribution::from_logits(const Eigen::VectorXd& logits) {
  if (logits.size() % 2 != 0) throw ConfigFault("ActionDistribution: odd logit count");
  const int n = static_cast<int>(logits.size()) / 2;
  ActionDistribution d;
  d.p_fire.resize(n);
  for (int i = 0; i < n; ++i) {
    // Softmax over the pair, stably via the logit difference.
    d.p_fire[i] = 1.0 / (1.0 + std::exp(logits[2 * i] - logits[2 * i + 1]));
  }
  return d;
}

ActionCommand sample_action(const ActionDistribution& dist, RngStream& rng, double& logp) {
  ActionCommand cmd;
  logp = 0.0;
  const int n = static_cast<int>(dist.p_fire.size());
  for (int i = 0; i < n; ++i) {
    const bool fire = rng.uniform() < dist.p_fire[i];
    if (i < kNumGroups) cmd.fire[i] = fire;
    logp += std::log(fire ? dist.p_fire[i] : 1.0 - dist.p_fire[i]);
  }
  return cmd;
}

ActionCommand argmax_action(const ActionDistribution& dist, double& logp) {
  ActionCommand cmd;
  logp = 0.0;
  const int n = static_cast<int>(dist.p_fire.size());
  for (int i = 0; i < n; ++i) {
    const bool fire = dist.p_fire[i] > 0.5;
    if (i < kNumGroups) cmd.fire[i] = fire;
    logp += std::log(fire ? dist.p_fire[i] : 1.0 - dist.p_fire[i]);
  }
  return cmd;
}

double action_log_prob(const ActionDistribution& dist, const Eigen::VectorXd& action_row) {
  double logp = 0.0;
  for (Eigen::Index i = 0; i < action_row.size(); ++i) {
    const bool fire = action_row[i] > 0.5;
    logp += std::log(fire ? dist.p_fire[i] : 1.0 - dist.p_fire[i]);
  }
  return logp;
}

namespace {

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& context) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw LoadFault("weight file truncated while reading " + context);
  return v;
}

void write_tensor(std::ofstream& out, const std::string& name, const Eigen::MatrixXd& m) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  // Row-major payload regardless of Eigen's internal layout.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
  }
}

}  // namespace

void save_weights(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadFault("cannot open weight file for writing: " + path);
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.obs_dim));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.act_dim));
  const std::array<int, 6> sizes = {params.policy.dims.h1, params.policy.dims.h2,
                                    params.policy.dims.h3, params.value.dims.h1,
                                    params.value.dims.h2,  params.value.dims.h3};
  for (int s : sizes) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  write_pod<std::uint32_t>(out, 30);  // tensor count
  params.policy.for_each([&out](const char* name, const Eigen::MatrixXd& m) {
    write_tensor(out, std::string("policy.") + name, m);
  });
  params.value.for_each([&out](const char* name, const Eigen::MatrixXd& m) {
    write_tensor(out, std::string("value.") + name, m);
  });
  if (!out) throw LoadFault("failed writing weight file: " + path);
}

NetworkParams load_weights(const std::string& path, int expected_obs_dim, int expected_act_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadFault("cannot open weight file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw LoadFault("not a weight file: " + path);
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kFormatVersion) {
    throw LoadFault("unsupported weight format version " + std::to_string(version));
  }
  read_pod<std::uint32_t>(in, "obs_dim");
  read_pod<std::uint32_t>(in, "act_dim");
  for (int i = 0; i < 6; ++i) read_pod<std::uint32_t>(in, "layer sizes");
  const auto tensor_count = read_pod<std::uint32_t>(in, "tensor count");
  if (tensor_count != 30) {
    throw LoadFault("unexpected tensor count " + std::to_string(tensor_count));
  }

  NetworkParams params;
  params.obs_dim = expected_obs_dim;
  params.act_dim = expected_act_dim;
  params.policy.resize(NetworkDims::policy(expected_obs_dim, expected_act_dim));
  params.value.resize(NetworkDims::value(expected_obs_dim));

  auto read_into = [&in](const std::string& expected_name, Eigen::MatrixXd& m) {
    const auto name_len = read_pod<std::uint32_t>(in, "tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw LoadFault("weight file truncated while reading tensor name");
    if (name != expected_name) {
      throw LoadFault("unexpected tensor '" + name + "', wanted '" + expected_name + "'", name);
    }
    const auto rows = read_pod<std::uint32_t>(in, name + " rows");
    const auto cols = read_pod<std::uint32_t>(in, name + " cols");
    if (rows != static_cast<std::uint32_t>(m.rows()) ||
        cols != static_cast<std::uint32_t>(m.cols())) {
      throw LoadFault("shape mismatch for tensor '" + name + "': file has " +
                          std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()),
                      name);
    }
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = read_pod<double>(in, name + " data");
    }
  };

  params.policy.for_each([&read_into](const char* name, Eigen::MatrixXd& m) {
    read_into(std::string("policy.") + name, m);
  });
  params.value.for_each([&read_into](const char* name, Eigen::MatrixXd& m) {
    read_into(std::string("value.") + name, m);
  });
  return params;
}

}  // namespace kkv
