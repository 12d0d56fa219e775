#pragma once

#include "audit/codec.hpp"
#include "audit/text.hpp"
#include "audit/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace audit {

/// DDPM variance schedule. t runs 1..T; index helpers accept t=0 as the
/// identity convention (alpha_bar(0) = 1).
struct NoiseSchedule {
  Array1d betas;  // betas(t-1) is beta_t

  int steps() const { return int(betas.size()); }
  double beta(int t) const { return betas(t - 1); }
  double alpha(int t) const { return 1.0 - betas(t - 1); }
  double alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bars_(t - 1);
  }

  static NoiseSchedule linear(int T, double beta_start = 1e-4,
                              double beta_end = 0.02);
  static NoiseSchedule from_betas(Array1d betas);

private:
  Array1d alpha_bars_;
  void finalize();
};

/// eps_theta(z_t, t, z_in, c_text) contract. Implementations must be
/// deterministic given inputs and parameters.
class Denoiser {
public:
  virtual ~Denoiser() = default;
  virtual Latent predict(const Latent& z_t, int t, const Latent& z_in,
                         const TextEmbedding& text) const = 0;
};

struct GuidanceConfig {
  double scale = 3.0;    // s >= 1
  double p_drop = 0.1;   // text-dropout probability during training

  void validate() const {
    if (scale < 1.0) throw std::invalid_argument("guidance scale must be >= 1");
    if (p_drop < 0.0 || p_drop > 1.0)
      throw std::invalid_argument("p_drop must be in [0, 1]");
  }
};

enum class MaskGranularity { Rough, Precise };

/// Latent-shaped 0/1 grid; 1 marks the observable region kept from the input.
struct ObservabilityMask {
  Array2d grid;  // same layout as Latent::data
  MaskGranularity granularity = MaskGranularity::Precise;

  static ObservabilityMask all_observable(int channels, int rows, int cols);
  static ObservabilityMask all_unobservable(int channels, int rows, int cols);
};

/// Widen the unobservable part to full time columns (every row of a column
/// with any unobservable cell becomes unobservable).
ObservabilityMask coarsen_to_time_band(const ObservabilityMask& mask,
                                       int latent_rows);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps. t=0 returns z0.
Latent forward_diffuse(const Latent& z0, int t, const Latent& eps,
                       const NoiseSchedule& sched);

/// Channel-concatenated conditioning: channels 0..C-1 = z_t, C..2C-1 = z_in.
Latent concat_condition(const Latent& z_t, const Latent& z_in);
std::pair<Latent, Latent> split_condition(const Latent& stacked);

/// eps_u + s * (eps_c - eps_u), two denoiser evaluations. s = 1 returns the
/// conditional prediction bit-exactly.
Latent cfg_epsilon(const Denoiser& denoiser, const Latent& z_t, int t,
                   const Latent& z_in, const TextEmbedding& text, double s);

struct TrainingExample {
  Latent z_in;
  Latent z_out;
  TextEmbedding text;
};

/// Mean over the batch of ||eps_hat - eps||_2 with t ~ U{1..T} and eps
/// standard normal; text dropped to the empty embedding with prob p_drop.
double ldm_loss(const std::vector<TrainingExample>& batch,
                const Denoiser& denoiser, const NoiseSchedule& sched, Rng& rng,
                double p_drop = 0.0);

/// Ancestral DDPM reverse chain from z_T ~ N(0, I), guided by cfg_epsilon.
Latent ddpm_sample(const Denoiser& denoiser, const Latent& z_in,
                   const TextEmbedding& text, const NoiseSchedule& sched,
                   const GuidanceConfig& guidance, std::uint64_t seed);

/// Noise the input to step N, then denoise N..1 with the same step rule.
Latent sdedit_sample(const Denoiser& denoiser, const Latent& z_input,
                     const TextEmbedding& text, const NoiseSchedule& sched,
                     int n_steps, const GuidanceConfig& guidance,
                     std::uint64_t seed);

enum class InpaintVariant { Rough, Precise, WithoutText };

/// Reverse chain that re-imposes the observable region of z_input at the
/// matching noise level after every step; final observable entries equal
/// z_input exactly.
Latent inpaint_sample(const Denoiser& denoiser, const Latent& z_input,
                      const ObservabilityMask& mask, const TextEmbedding& text,
                      const NoiseSchedule& sched, const GuidanceConfig& guidance,
                      std::uint64_t seed, InpaintVariant variant);

/// Analytic posterior-expected noise for z0 ~ N(mu, diag(var)); ignores z_in
/// and text. Used as a verification oracle.
std::unique_ptr<Denoiser> make_gaussian_oracle_denoiser(
    const Array2d& mu, const Array2d& var, const NoiseSchedule& sched);

/// Tiny trainable denoiser: per-timestep-bucket gains on z_t and z_in plus a
/// text-conditioned offset channel. Linear in its parameters, so training is
/// exact-gradient and CPU-cheap.
class LinearDenoiser : public Denoiser {
public:
  LinearDenoiser(int n_buckets, int text_dim, int total_steps);

  Latent predict(const Latent& z_t, int t, const Latent& z_in,
                 const TextEmbedding& text) const override;

  int bucket(int t) const;
  Eigen::Index n_params() const;
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  int n_buckets() const { return n_buckets_; }
  int text_dim() const { return text_dim_; }
  int total_steps() const { return total_steps_; }

  /// Gradient of ||predict(...) - eps||_2 w.r.t. the parameters.
  Vector loss_gradient(const Latent& z_t, int t, const Latent& z_in,
                       const TextEmbedding& text, const Latent& eps,
                       double* loss_out = nullptr) const;

private:
  int n_buckets_, text_dim_, total_steps_;
  Vector params_;  // [a_0..a_K-1, b_0..b_K-1, c_0..c_K-1, u_0..u_E-1]
  double text_scalar(const TextEmbedding& text) const;
};

struct OptimizerConfig {
  int steps = 500;
  int batch_size = 8;
  double lr = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epoch_size = 50;  // steps per reported epoch
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;  // deterministic eval after each epoch
  double initial_loss = 0.0;         // same eval before any update
};

TrainResult train(std::vector<TrainingExample> examples,
                  LinearDenoiser& denoiser, const NoiseSchedule& sched,
                  const GuidanceConfig& guidance, const OptimizerConfig& opt,
                  std::uint64_t seed);

/// Checkpoint: header (arch + schedule + seed) and the flat parameter array.
void save_checkpoint(const std::string& path, const LinearDenoiser& denoiser,
                     const NoiseSchedule& sched, std::uint64_t seed);
struct Checkpoint {
  std::unique_ptr<LinearDenoiser> denoiser;
  NoiseSchedule sched;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

void save_loss_curve(const std::string& path, const std::vector<double>& losses);
std::vector<double> load_loss_curve(const std::string& path);

}  // namespace audit
