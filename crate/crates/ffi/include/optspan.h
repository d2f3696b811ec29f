#ifndef OPTSPAN_H
#define OPTSPAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OsStatus {
  OS_STATUS_OK = 0,
  OS_STATUS_NULL_POINTER = 1,
  OS_STATUS_INVALID_ARGUMENT = 2,
  OS_STATUS_DIMENSION_MISMATCH = 3,
  OS_STATUS_NOT_MEASURABLE = 4,
  OS_STATUS_FREE_LUNCH = 5,
  OS_STATUS_NOT_DETERMINED = 6,
  OS_STATUS_BUFFER_TOO_SMALL = 7,
  OS_STATUS_PARSE = 8,
  OS_STATUS_PANIC = 9,
} OsStatus;

// Opaque market handle.
typedef struct OsMarket OsMarket;

// Opaque handle for a bond price and call price curve.
typedef struct OsPricing OsPricing;

typedef struct OsPriceBounds {
  double p_min;
  double p_max;
  double p_min_strict;
  double p_max_strict;
  double gap;
  bool unique;
} OsPriceBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a market from `n` probabilities (summing to one) and underlying
// values.
//
// # Safety
// `probs` and `underlying` must point to `n` readable doubles; `out` must be
// writable.
enum OsStatus os_market_new(const double *probs,
                            const double *underlying,
                            size_t n,
                            struct OsMarket **out);

// Creates a market from JSON `{"probs": [...], "underlying": [...]}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum OsStatus os_market_from_json(const char *json, struct OsMarket **out);

// # Safety
// `m` must come from a market constructor and not be freed twice.
void os_market_free(struct OsMarket *m);

// Number of states, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live market handle.
size_t os_market_len(const struct OsMarket *m);

// Creates pricing input from a bond price and `count` calls with strictly
// increasing strikes.
//
// # Safety
// `strikes` and `prices` must point to `count` readable doubles; `out` must
// be writable.
enum OsStatus os_pricing_new(double bond,
                             const double *strikes,
                             const double *prices,
                             size_t count,
                             struct OsPricing **out);

// # Safety
// `p` must come from [`os_pricing_new`] and not be freed twice.
void os_pricing_free(struct OsPricing *p);

// Whether the claim is constant on the level sets of the underlying.
//
// # Safety
// `claim` must point to `n` doubles and `out` must be writable.
enum OsStatus os_is_measurable(const struct OsMarket *m,
                               const double *claim_ptr,
                               size_t n,
                               bool *out);

// Writes the conditional expectation of the claim given the underlying.
//
// # Safety
// `claim` and `out` must each hold `n` doubles.
enum OsStatus os_conditional_expectation(const struct OsMarket *m,
                                         const double *claim_ptr,
                                         size_t n,
                                         double *out);

// Exact option replication of a measurable claim. Legs go to `strikes` and
// `weights`, which hold `capacity` entries; `legs` receives the number of
// legs, also when the buffers are too small.
//
// # Safety
// `claim` must hold `n` doubles, `strikes` and `weights` `capacity`
// doubles; `cash` and `legs` must be writable.
enum OsStatus os_exact_replicate(const struct OsMarket *m,
                                 const double *claim_ptr,
                                 size_t n,
                                 double *cash,
                                 double *strikes,
                                 double *weights,
                                 size_t capacity,
                                 size_t *legs);

// Payoff of `cash + sum weights[j] (f - strikes[j])^+` in every state.
//
// # Safety
// `strikes` and `weights` must hold `legs` doubles; `out` must hold one
// double per state.
enum OsStatus os_portfolio_payoff(const struct OsMarket *m,
                                  double cash,
                                  const double *strikes,
                                  const double *weights,
                                  size_t legs,
                                  double *out);

// Norm of a claim; `spec` is e.g. "L1", "Lp:2.5", "Linf", "Orlicz:exp".
//
// # Safety
// `claim` must hold `n` doubles, `spec` must be NUL-terminated and `out`
// writable.
enum OsStatus os_norm(const struct OsMarket *m,
                      const double *claim_ptr,
                      size_t n,
                      const char *spec,
                      double *out);

// Decides whether the quotes admit a free lunch. When they do not, `nfl`
// is set and, if non-null, `witness` receives a strictly positive density
// with mean one and `lambda` the scale that reprices the quotes.
//
// # Safety
// `nfl` must be writable; `witness` must be null or hold one double per
// state; `lambda` must be null or writable.
enum OsStatus os_no_free_lunch(const struct OsPricing *p,
                               const struct OsMarket *m,
                               bool *nfl,
                               double *witness,
                               double *lambda);

// Price bounds of a claim consistent with the quotes.
//
// # Safety
// `claim` must hold `n` doubles and `out` must be writable.
enum OsStatus os_price_bounds(const struct OsPricing *p,
                              const struct OsMarket *m,
                              const double *claim_ptr,
                              size_t n,
                              struct OsPriceBounds *out);

// The unique arbitrage price of a measurable claim.
//
// # Safety
// `claim` must hold `n` doubles and `out` must be writable.
enum OsStatus os_extend_by_arbitrage(const struct OsPricing *p,
                                     const struct OsMarket *m,
                                     const double *claim_ptr,
                                     size_t n,
                                     double *out);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length
// plus one.
//
// # Safety
// `buf` must be null or hold `len` bytes.
size_t os_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *os_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTSPAN_H */
