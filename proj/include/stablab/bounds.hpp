#pragma once

#include "stablab/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace stablab {

/// Evaluated right-hand side of a bound with its additive decomposition.
struct BoundReport {
  std::string name;
  std::vector<std::pair<std::string, double>> inputs;
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
  // Free-form observations such as "xi2_underflow" or "covering_degenerate".
  std::vector<std::string> flags;

  double term(const std::string& key) const;
  double input(const std::string& key) const;
  bool has_flag(const std::string& flag) const;
};

/// (4 sqrt(2) L0 (lambda + 4 D L2) / lambda^{3/2}) sqrt(eps_t) plus the
/// 1/n term shared with the minima generalization bound.
BoundReport convex_stability_bound(const ConstantsBundle& c, double n, int d, double eps_t);
/// eps_t + the stability bound.
BoundReport convex_excess_bound(const ConstantsBundle& c, double n, int d, double eps_t);

double gd_opt_bound(const ConstantsBundle& c, double t);
double sgd_opt_bound(const ConstantsBundle& c, double t);

/// Failure probability of the local strong convexity event. The report
/// carries the raw total; `clamped` holds min(total, 1).
struct ProbabilityReport {
  BoundReport report;
  double clamped = 0.0;
};
ProbabilityReport good_event_prob_bound(const ConstantsBundle& c, double n, int d);

/// 8 L0/(n lambda) [L0 + {...} min{3D, 3 lambda/(2 L2)}].
BoundReport local_minima_gen_bound(const ConstantsBundle& c, double n, int d);

struct XiTerms {
  double xi1 = 0.0;
  double xi2 = 0.0;
  double r = 0.0;
  double log_xi2 = 0.0;     // natural log of xi2 before any cutoff (may be -inf)
  bool degenerate = false;  // r >= 3D; covering count taken as 1
  bool underflow = false;   // xi2 < 1e-300 reported as 0
};
XiTerms xi_terms(const ConstantsBundle& c, double n, int d);

/// Covering radius min{lambda/(8 L2), alpha^2/(16 L0 L1)}; lambda/(8 L2) is
/// +inf when L2 = 0.
double covering_radius(const ConstantsBundle& c);

enum class SpuriousVariant { with_spurious, no_spurious };
std::string to_string(SpuriousVariant v);
SpuriousVariant parse_variant(const std::string& s);

BoundReport nonconvex_gen_bound(const ConstantsBundle& c, double n, int d, double zeta_t, double delta,
                                SpuriousVariant variant, double delta_prime);
/// `opt_gap` enters only the with_spurious variant.
BoundReport nonconvex_excess_bound(const ConstantsBundle& c, double n, int d, double zeta_t, double delta,
                                   SpuriousVariant variant, double delta_prime, double opt_gap);

struct IterationBound {
  double statement = 0.0;  // 2M max{2 L1/eps^2, 256 L2^2/(9 eps)}
  double proof = 0.0;      // 2M max{4 L1/eps^2, 256 L2^2/(9 eps)}
};
IterationBound pgd_iteration_bound(const ConstantsBundle& c, double eps);

/// Per-step decrease guaranteed over two consecutive PGD steps.
double pgd_pair_decrease(const ConstantsBundle& c, double eps);

enum class TailKind { gradient_inner, hessian };
std::string to_string(TailKind k);
TailKind parse_tail_kind(const std::string& s);

struct TailBound {
  double raw = 0.0;
  double clamped = 0.0;
};
/// 2 exp(-n delta^2/(16 L0^4)) or 2d exp(-n delta^2/(16 L1^2)).
TailBound subgaussian_tail_bound(const ConstantsBundle& c, double n, int d, double delta_dev, TailKind which);

/// Deviation delta at which the tail bound equals `level` (inverse of the above).
double tail_delta_for_level(const ConstantsBundle& c, double n, int d, double level, TailKind which);

/// E||grad R_S(w*) - grad R(w*)||^2 <= L0^2/n.
double gradient_moment_bound(const ConstantsBundle& c, double n);
/// E||hess R_S(w*) - hess R(w*)||^2 <= (1/n)(10 sqrt(log d) L1 + 8e log d L1/sqrt(n))^2.
double hessian_moment_bound(const ConstantsBundle& c, double n, int d);

/// 8 L0/(n lambda).
double minima_distance_bound(const ConstantsBundle& c, double n);

/// Distance to the minima set in terms of gradient norm: the proof form
/// uses 2/lambda, the stated form lambda/4.
double error_bound_proof_factor(const ConstantsBundle& c);
double error_bound_statement_factor(const ConstantsBundle& c);

}  // namespace stablab
