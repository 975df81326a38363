#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcal/calibrate.hpp"
#include "dcal/loss.hpp"
#include "dcal/predictor.hpp"
#include "dcal/samples.hpp"

namespace dcal {

/// Per action a: r(a) = k2(a) phi(1) + (k1(a) - k2(a)) phi(c(a)) under the min
/// kernel, so l(a, y) = k1 y for y < c and k2 y + (k1 - k2) c otherwise.
LossFunction make_piecewise_linear_loss(const Kernel& kernel, const Eigen::VectorXd& k1,
                                        const Eigen::VectorXd& k2, const Eigen::VectorXd& c,
                                        double bound, std::string id = "piecewise");

/// Per action a: r(a) = sign phi(alpha(a)) under the exp kernel. Columns of
/// `alpha` are simplex vectors.
LossFunction make_cobb_douglas_loss(const Kernel& kernel, const Eigen::MatrixXd& alpha,
                                    double sign, double bound, std::string id = "cobb-douglas");

enum class WorldKind { Deterministic, Noisy, Planted };
std::string_view to_string(WorldKind kind);
WorldKind world_kind_from_string(std::string_view name);

struct WorldSpec {
  WorldKind kind = WorldKind::Planted;
  Eigen::Index contexts = 4;     // one-hot context categories
  Eigen::Index support = 8;      // outcome support size
  double shift_norm = 0.3;       // planted worlds only
  double noise = 0.2;            // weight of the diffuse part of each conditional
  std::uint64_t seed = 0;
};

/// Finite world: contexts are one-hot vectors over `contexts` categories drawn
/// uniformly, and y | c follows column c of `truth` over the support points.
/// `planted` is the predictor table q with E[phi(y) | c] = q(c) + shift.
struct FiniteWorld {
  Kernel kernel;
  Eigen::MatrixXd support;   // dim x m
  Eigen::MatrixXd truth;     // m x C
  Eigen::MatrixXd planted;   // m x C
  RkhsElement shift;
  WorldSpec spec;

  Batch sample(Eigen::Index n, Rng& rng) const;
};

FiniteWorld make_world(const Kernel& kernel, const WorldSpec& spec);

/// Support points in the kernel's domain; the min kernel's includes 0 and 1.
Eigen::MatrixXd make_support(const Kernel& kernel, Eigen::Index m, Rng& rng);

Predictor planted_predictor(const FiniteWorld& w);
Predictor truth_predictor(const FiniteWorld& w);
/// Population mean of phi(y), independent of the context.
Predictor marginal_predictor(const FiniteWorld& w);

/// Infinite seeded stream from a world.
class WorldSource : public SampleSource {
 public:
  WorldSource(const FiniteWorld& world, std::uint64_t seed) : world_(&world), rng_(seed) {}
  std::optional<Batch> next_batch(Eigen::Index n) override { return world_->sample(n, rng_); }

 private:
  const FiniteWorld* world_;
  Rng rng_;
};

enum class LowerBoundWorld { D1, D2 };

/// Predictions are the contexts, drawn uniformly from V = {e_i / 2}.
struct LowerBoundInstance {
  Eigen::Index d = 2;
  double epsilon = 0.1;
  LowerBoundWorld world = LowerBoundWorld::D1;
  Eigen::VectorXd sigma;            // D2 only, entries +-1/sqrt(d)
  Eigen::MatrixXd predictions;      // d x n
  Eigen::MatrixXd outcomes;         // d x n
  std::vector<Eigen::Index> index;  // which vertex each prediction is

  Eigen::Index n() const { return outcomes.cols(); }
};

/// `sigma` fixes the D2 direction; drawn uniformly when absent.
LowerBoundInstance gen_lower_bound(Eigen::Index d, double epsilon, Eigen::Index n,
                                   LowerBoundWorld world, Rng& rng,
                                   std::optional<Eigen::VectorXd> sigma = std::nullopt);

/// Accepts unless some repeated prediction shows discordant noise signs.
bool collision_accepts(const LowerBoundInstance& inst);

/// max over the columns r of the grid of
/// ||E[(y - p) 1(<r,p> > 0)]|| + ||E[(y - p) 1(<r,p> <= 0)]||.
double decce_linear_binary(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& outcomes,
                           const Eigen::MatrixXd& r_grid);

/// All sign vectors / sqrt(d) for d <= 12, otherwise `random_count` random
/// unit vectors.
Eigen::MatrixXd default_r_grid(Eigen::Index d, Rng& rng, Eigen::Index random_count = 4096);

/// Every labelling of V realized by 1(<r, v> > 0) for some grid column.
bool shatters_vertices(Eigen::Index d, const Eigen::MatrixXd& r_grid);

}  // namespace dcal
