#include "audit/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace audit {

NoiseSchedule NoiseSchedule::from_betas(Array1d betas) {
  if (betas.size() < 1) throw std::invalid_argument("NoiseSchedule: empty betas");
  for (Eigen::Index i = 0; i < betas.size(); ++i) {
    if (!(betas(i) > 0.0) || !(betas(i) < 1.0))
      throw std::invalid_argument("NoiseSchedule: betas must lie in (0, 1)");
    if (i > 0 && betas(i) < betas(i - 1))
      throw std::invalid_argument("NoiseSchedule: betas must be non-decreasing");
  }
  NoiseSchedule s;
  s.betas = std::move(betas);
  s.finalize();
  return s;
}

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw std::invalid_argument("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.betas = Array1d::LinSpaced(T, beta_start, beta_end);
  s.finalize();
  return s;
}

void NoiseSchedule::finalize() {
  alpha_bars_.resize(betas.size());
  double prod = 1.0;
  for (Eigen::Index i = 0; i < betas.size(); ++i) {
    prod *= 1.0 - betas(i);
    alpha_bars_(i) = prod;
  }
}

ObservabilityMask ObservabilityMask::all_observable(int c, int h, int w) {
  return {Array2d::Ones(c * h, w), MaskGranularity::Precise};
}

ObservabilityMask ObservabilityMask::all_unobservable(int c, int h, int w) {
  return {Array2d::Zero(c * h, w), MaskGranularity::Precise};
}

ObservabilityMask coarsen_to_time_band(const ObservabilityMask& mask,
                                       int latent_rows) {
  (void)latent_rows;
  ObservabilityMask out = mask;
  out.granularity = MaskGranularity::Rough;
  for (Eigen::Index j = 0; j < mask.grid.cols(); ++j)
    if (mask.grid.col(j).minCoeff() < 0.5) out.grid.col(j).setZero();
  return out;
}

Latent forward_diffuse(const Latent& z0, int t, const Latent& eps,
                       const NoiseSchedule& sched) {
  if (t < 0 || t > sched.steps())
    throw std::invalid_argument("forward_diffuse: t out of range");
  if (t == 0) return z0;
  if (!z0.same_shape(eps))
    throw std::invalid_argument("forward_diffuse: eps shape mismatch");
  double ab = sched.alpha_bar(t);
  Latent out = z0;
  out.data = std::sqrt(ab) * z0.data + std::sqrt(1.0 - ab) * eps.data;
  return out;
}

Latent concat_condition(const Latent& z_t, const Latent& z_in) {
  if (!z_t.same_shape(z_in))
    throw std::invalid_argument("concat_condition: shape mismatch");
  Latent out(z_t.channels * 2, z_t.rows, z_t.cols);
  out.data.topRows(z_t.data.rows()) = z_t.data;
  out.data.bottomRows(z_in.data.rows()) = z_in.data;
  return out;
}

std::pair<Latent, Latent> split_condition(const Latent& stacked) {
  if (stacked.channels % 2)
    throw std::invalid_argument("split_condition: odd channel count");
  int c = stacked.channels / 2;
  Latent a(c, stacked.rows, stacked.cols), b(c, stacked.rows, stacked.cols);
  a.data = stacked.data.topRows(c * stacked.rows);
  b.data = stacked.data.bottomRows(c * stacked.rows);
  return {std::move(a), std::move(b)};
}

Latent cfg_epsilon(const Denoiser& denoiser, const Latent& z_t, int t,
                   const Latent& z_in, const TextEmbedding& text, double s) {
  if (s < 1.0) throw std::invalid_argument("cfg_epsilon: s must be >= 1");
  TextEmbedding empty = empty_text_embedding({int(text.dim()), 300});
  Latent eps_u = denoiser.predict(z_t, t, z_in, empty);
  Latent eps_c = denoiser.predict(z_t, t, z_in, text);
  if (!eps_u.data.allFinite() || !eps_c.data.allFinite())
    throw std::runtime_error("cfg_epsilon: non-finite denoiser output");
  if (s == 1.0) return eps_c;
  Latent out = eps_u;
  out.data = eps_u.data + s * (eps_c.data - eps_u.data);
  return out;
}

double ldm_loss(const std::vector<TrainingExample>& batch,
                const Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng,
                double p_drop) {
  if (batch.empty()) throw std::invalid_argument("ldm_loss: empty batch");
  double acc = 0.0;
  for (const auto& ex : batch) {
    int t = int(rng.uniform_int(sched.steps())) + 1;
    Latent eps = ex.z_out;
    eps.data = rng.normal_array(eps.data.rows(), eps.data.cols());
    bool drop = rng.uniform() < p_drop;
    Latent z_t = forward_diffuse(ex.z_out, t, eps, sched);
    const TextEmbedding cond =
        drop ? empty_text_embedding({int(ex.text.dim()), 300}) : ex.text;
    Latent pred = denoiser.predict(z_t, t, ex.z_in, cond);
    if (!pred.data.allFinite())
      throw std::runtime_error("ldm_loss: non-finite denoiser output");
    acc += std::sqrt((pred.data - eps.data).square().sum());
  }
  return acc / double(batch.size());
}

namespace {

Latent reverse_step(const Latent& z_t, int t, const Latent& eps_hat,
                    const NoiseSchedule& sched, Rng& chain_rng) {
  double beta = sched.beta(t);
  double ab = sched.alpha_bar(t);
  double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
  Latent out = z_t;
  out.data =
      inv_sqrt_alpha * (z_t.data - beta / std::sqrt(1.0 - ab) * eps_hat.data);
  if (t > 1) {
    Array2d noise = chain_rng.normal_array(z_t.data.rows(), z_t.data.cols());
    out.data += std::sqrt(beta) * noise;
  }
  if (!out.data.allFinite())
    throw std::runtime_error("reverse chain diverged at t=" + std::to_string(t));
  return out;
}

}  // namespace

Latent ddpm_sample(const Denoiser& denoiser, const Latent& z_in,
                   const TextEmbedding& text, const NoiseSchedule& sched,
                   const GuidanceConfig& guidance, std::uint64_t seed) {
  guidance.validate();
  Rng init_rng(derive_seed(seed, "sample-init"));
  Rng chain_rng(derive_seed(seed, "sample-chain"));
  Latent z = z_in;
  z.data = init_rng.normal_array(z_in.data.rows(), z_in.data.cols());
  for (int t = sched.steps(); t >= 1; --t) {
    Latent eps_hat = cfg_epsilon(denoiser, z, t, z_in, text, guidance.scale);
    z = reverse_step(z, t, eps_hat, sched, chain_rng);
  }
  return z;
}

Latent sdedit_sample(const Denoiser& denoiser, const Latent& z_input,
                     const TextEmbedding& text, const NoiseSchedule& sched,
                     int n_steps, const GuidanceConfig& guidance,
                     std::uint64_t seed) {
  guidance.validate();
  if (n_steps < 0 || n_steps > sched.steps())
    throw std::invalid_argument("sdedit_sample: N out of range");
  if (n_steps == 0) return z_input;
  Rng noise_rng(derive_seed(seed, "sdedit-noise"));
  Rng chain_rng(derive_seed(seed, "sample-chain"));
  Latent eps = z_input;
  eps.data = noise_rng.normal_array(z_input.data.rows(), z_input.data.cols());
  Latent z = forward_diffuse(z_input, n_steps, eps, sched);
  for (int t = n_steps; t >= 1; --t) {
    Latent eps_hat = cfg_epsilon(denoiser, z, t, z_input, text, guidance.scale);
    z = reverse_step(z, t, eps_hat, sched, chain_rng);
  }
  return z;
}

Latent inpaint_sample(const Denoiser& denoiser, const Latent& z_input,
                      const ObservabilityMask& mask, const TextEmbedding& text,
                      const NoiseSchedule& sched, const GuidanceConfig& guidance,
                      std::uint64_t seed, InpaintVariant variant) {
  guidance.validate();
  if (mask.grid.rows() != z_input.data.rows() ||
      mask.grid.cols() != z_input.data.cols())
    throw std::invalid_argument("inpaint_sample: mask shape mismatch");

  const TextEmbedding cond = variant == InpaintVariant::WithoutText
                                 ? empty_text_embedding({int(text.dim()), 300})
                                 : text;
  ObservabilityMask m = mask;
  if (variant == InpaintVariant::Rough &&
      mask.granularity != MaskGranularity::Rough)
    m = coarsen_to_time_band(mask, z_input.rows);

  Rng init_rng(derive_seed(seed, "sample-init"));
  Rng chain_rng(derive_seed(seed, "sample-chain"));
  Rng replace_rng(derive_seed(seed, "inpaint-replace"));

  Latent z = z_input;
  z.data = init_rng.normal_array(z_input.data.rows(), z_input.data.cols());
  for (int t = sched.steps(); t >= 1; --t) {
    Latent eps_hat = cfg_epsilon(denoiser, z, t, z_input, cond, guidance.scale);
    z = reverse_step(z, t, eps_hat, sched, chain_rng);
    // re-impose the observable region at the t-1 noise level
    Latent eps = z_input;
    eps.data = replace_rng.normal_array(z_input.data.rows(), z_input.data.cols());
    Latent observed = forward_diffuse(z_input, t - 1, eps, sched);
    z.data = m.grid * observed.data + (1.0 - m.grid) * z.data;
  }
  return z;
}

namespace {

class GaussianOracleDenoiser : public Denoiser {
public:
  GaussianOracleDenoiser(Array2d mu, Array2d var, NoiseSchedule sched)
      : mu_(std::move(mu)), var_(std::move(var)), sched_(std::move(sched)) {}

  Latent predict(const Latent& z_t, int t, const Latent&,
                 const TextEmbedding&) const override {
    double ab = sched_.alpha_bar(t);
    Latent out = z_t;
    out.data = (z_t.data - std::sqrt(ab) * mu_) * std::sqrt(1.0 - ab) /
               (ab * var_ + (1.0 - ab));
    return out;
  }

  void set_schedule(NoiseSchedule sched) { sched_ = std::move(sched); }

private:
  Array2d mu_, var_;
  NoiseSchedule sched_;
};

}  // namespace

std::unique_ptr<Denoiser> make_gaussian_oracle_denoiser(
    const Array2d& mu, const Array2d& var, const NoiseSchedule& sched) {
  if ((var <= 0.0).any())
    throw std::invalid_argument("gaussian oracle: variances must be positive");
  return std::make_unique<GaussianOracleDenoiser>(mu, var, sched);
}

LinearDenoiser::LinearDenoiser(int n_buckets, int text_dim, int total_steps)
    : n_buckets_(n_buckets), text_dim_(text_dim), total_steps_(total_steps) {
  if (n_buckets < 1 || text_dim < 1 || total_steps < 1)
    throw std::invalid_argument("LinearDenoiser: bad sizes");
  params_ = Vector::Zero(3 * n_buckets + text_dim);
}

int LinearDenoiser::bucket(int t) const {
  int k = (t - 1) * n_buckets_ / total_steps_;
  return std::min(std::max(k, 0), n_buckets_ - 1);
}

Eigen::Index LinearDenoiser::n_params() const { return params_.size(); }

double LinearDenoiser::text_scalar(const TextEmbedding& text) const {
  if (text.dim() != text_dim_)
    throw std::invalid_argument("LinearDenoiser: text dim mismatch");
  Vector pooled = text.vectors.colwise().mean().transpose();
  return params_.segment(3 * n_buckets_, text_dim_).dot(pooled);
}

Latent LinearDenoiser::predict(const Latent& z_t, int t, const Latent& z_in,
                               const TextEmbedding& text) const {
  if (!z_t.same_shape(z_in))
    throw std::invalid_argument("LinearDenoiser: latent shape mismatch");
  int k = bucket(t);
  double a = params_(k), b = params_(n_buckets_ + k), c = params_(2 * n_buckets_ + k);
  Latent out = z_t;
  out.data = a * z_t.data + b * z_in.data + c * text_scalar(text);
  return out;
}

Vector LinearDenoiser::loss_gradient(const Latent& z_t, int t,
                                     const Latent& z_in,
                                     const TextEmbedding& text,
                                     const Latent& eps, double* loss_out) const {
  int k = bucket(t);
  double c = params_(2 * n_buckets_ + k);
  double s_text = text_scalar(text);
  Latent pred = predict(z_t, t, z_in, text);
  Array2d r = pred.data - eps.data;
  double loss = std::sqrt(r.square().sum());
  if (loss_out) *loss_out = loss;

  Vector grad = Vector::Zero(params_.size());
  if (loss > 1e-12) {
    Array2d g = r / loss;
    grad(k) = (g * z_t.data).sum();
    grad(n_buckets_ + k) = (g * z_in.data).sum();
    grad(2 * n_buckets_ + k) = s_text * g.sum();
    Vector pooled = text.vectors.colwise().mean().transpose();
    grad.segment(3 * n_buckets_, text_dim_) = c * g.sum() * pooled;
  }
  return grad;
}

TrainResult train(std::vector<TrainingExample> examples,
                  LinearDenoiser& denoiser, const NoiseSchedule& sched,
                  const GuidanceConfig& guidance, const OptimizerConfig& opt,
                  std::uint64_t seed) {
  guidance.validate();
  if (examples.empty()) throw std::invalid_argument("train: no examples");

  Rng rng(derive_seed(seed, "train"));
  Rng eval_rng(derive_seed(seed, "train-eval"));

  // fixed evaluation draws reused after every epoch
  const int n_eval = 64;
  struct EvalDraw {
    int example, t;
    Array2d eps;
  };
  std::vector<EvalDraw> eval_set;
  eval_set.reserve(n_eval);
  for (int i = 0; i < n_eval; ++i) {
    int e = int(eval_rng.uniform_int(examples.size()));
    int t = int(eval_rng.uniform_int(sched.steps())) + 1;
    const auto& ex = examples[e];
    eval_set.push_back(
        {e, t, eval_rng.normal_array(ex.z_out.data.rows(), ex.z_out.data.cols())});
  }
  auto eval_loss = [&]() {
    double acc = 0.0;
    for (const auto& d : eval_set) {
      const auto& ex = examples[d.example];
      Latent eps = ex.z_out;
      eps.data = d.eps;
      Latent z_t = forward_diffuse(ex.z_out, d.t, eps, sched);
      Latent pred = denoiser.predict(z_t, d.t, ex.z_in, ex.text);
      acc += std::sqrt((pred.data - eps.data).square().sum());
    }
    return acc / double(eval_set.size());
  };

  TrainResult result;
  result.initial_loss = eval_loss();
  Vector m = Vector::Zero(denoiser.n_params());
  Vector v = Vector::Zero(denoiser.n_params());
  TextEncoderConfig text_cfg{denoiser.text_dim(), 300};
  const TextEmbedding empty = empty_text_embedding(text_cfg);

  for (int step = 1; step <= opt.steps; ++step) {
    Vector grad = Vector::Zero(denoiser.n_params());
    double batch_loss = 0.0;
    for (int b = 0; b < opt.batch_size; ++b) {
      const auto& ex = examples[rng.uniform_int(examples.size())];
      int t = int(rng.uniform_int(sched.steps())) + 1;
      Latent eps = ex.z_out;
      eps.data = rng.normal_array(eps.data.rows(), eps.data.cols());
      bool drop = rng.uniform() < guidance.p_drop;
      Latent z_t = forward_diffuse(ex.z_out, t, eps, sched);
      double loss = 0.0;
      grad += denoiser.loss_gradient(z_t, t, ex.z_in, drop ? empty : ex.text,
                                     eps, &loss);
      batch_loss += loss;
    }
    grad /= double(opt.batch_size);
    batch_loss /= double(opt.batch_size);
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("train: non-finite loss at step " +
                               std::to_string(step));
    result.step_losses.push_back(batch_loss);

    m = opt.adam_beta1 * m + (1.0 - opt.adam_beta1) * grad;
    v = opt.adam_beta2 * v + (1.0 - opt.adam_beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(opt.adam_beta1, step);
    double bc2 = 1.0 - std::pow(opt.adam_beta2, step);
    denoiser.params() -=
        (opt.lr * (m / bc1).array() / ((v / bc2).array().sqrt() + opt.adam_eps))
            .matrix();

    if (step % opt.epoch_size == 0) result.epoch_losses.push_back(eval_loss());
  }
  if (opt.steps % opt.epoch_size != 0) result.epoch_losses.push_back(eval_loss());
  return result;
}

void save_checkpoint(const std::string& path, const LinearDenoiser& denoiser,
                     const NoiseSchedule& sched, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write("ACKP", 4);
  std::int32_t vals[3] = {denoiser.n_buckets(), denoiser.text_dim(),
                          sched.steps()};
  out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
  out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
  out.write(reinterpret_cast<const char*>(sched.betas.data()),
            sched.betas.size() * sizeof(double));
  out.write(reinterpret_cast<const char*>(denoiser.params().data()),
            denoiser.n_params() * sizeof(double));
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::strncmp(magic, "ACKP", 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::int32_t vals[3];
  in.read(reinterpret_cast<char*>(vals), sizeof(vals));
  if (vals[0] < 1 || vals[1] < 1 || vals[2] < 1)
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  Checkpoint ck;
  in.read(reinterpret_cast<char*>(&ck.seed), sizeof(ck.seed));
  Array1d betas(vals[2]);
  in.read(reinterpret_cast<char*>(betas.data()), vals[2] * sizeof(double));
  ck.sched = NoiseSchedule::from_betas(std::move(betas));
  ck.denoiser = std::make_unique<LinearDenoiser>(vals[0], vals[1], vals[2]);
  in.read(reinterpret_cast<char*>(ck.denoiser->params().data()),
          ck.denoiser->n_params() * sizeof(double));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return ck;
}

void save_loss_curve(const std::string& path, const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_loss_curve: cannot open " + path);
  out.precision(17);
  for (size_t i = 0; i < losses.size(); ++i)
    out << (i + 1) << "\t" << losses[i] << "\n";
}

std::vector<double> load_loss_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_loss_curve: cannot open " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    long step;
    double loss;
    if (ss >> step >> loss) out.push_back(loss);
  }
  return out;
}

}  // namespace audit
