#ifndef EVGRID_H
#define EVGRID_H

/* Generated by cbindgen from the evgrid-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum EvgridStatus {
  EVGRID_STATUS_OK = 0,
  EVGRID_STATUS_NULL_POINTER = 1,
  EVGRID_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed document or invalid argument.
   */
  EVGRID_STATUS_VALIDATION = 3,
  EVGRID_STATUS_BUDGET_EXCEEDED = 4,
  EVGRID_STATUS_UNSUPPORTED_PRICING = 5,
  EVGRID_STATUS_NOT_CONVERGED = 6,
  EVGRID_STATUS_DOMAIN = 7,
  EVGRID_STATUS_OUT_OF_RANGE = 8,
  EVGRID_STATUS_NO_EQUILIBRIUM = 9,
  EVGRID_STATUS_INTERNAL = 10,
} EvgridStatus;

/**
 * One action per vehicle.
 */
typedef struct EvgridProfile EvgridProfile;

/**
 * A validated scenario.
 */
typedef struct EvgridScenario EvgridScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the
 * library and valid until the next failing call on the same thread.
 */
const char *evgrid_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *evgrid_version(void);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum EvgridStatus evgrid_scenario_from_json(const char *json, struct EvgridScenario **out);

/**
 * Releases a scenario; null is ignored.
 *
 * # Safety
 * `s` must come from [`evgrid_scenario_from_json`] and not be used after.
 */
void evgrid_scenario_free(struct EvgridScenario *s);

/**
 * # Safety
 * `s` must be a live scenario handle and `out` writable.
 */
enum EvgridStatus evgrid_scenario_vehicle_count(const struct EvgridScenario *s, size_t *out);

/**
 * Number of real stations.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` writable.
 */
enum EvgridStatus evgrid_scenario_station_count(const struct EvgridScenario *s, size_t *out);

/**
 * Profile in which every vehicle takes its first option with zero load.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` writable.
 */
enum EvgridStatus evgrid_default_profile(const struct EvgridScenario *s,
                                         struct EvgridProfile **out);

/**
 * Releases a profile; null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used after.
 */
void evgrid_profile_free(struct EvgridProfile *p);

/**
 * Reads vehicle `i`'s route, station and load.
 *
 * # Safety
 * `p` must be live; the out pointers writable.
 */
enum EvgridStatus evgrid_profile_action(const struct EvgridProfile *p,
                                        size_t i,
                                        size_t *route,
                                        size_t *station,
                                        double *load);

/**
 * Replaces vehicle `i`'s action after checking it against the scenario.
 *
 * # Safety
 * `s` and `p` must be live handles.
 */
enum EvgridStatus evgrid_profile_set_action(const struct EvgridScenario *s,
                                            struct EvgridProfile *p,
                                            size_t i,
                                            size_t route,
                                            size_t station,
                                            double load);

/**
 * Best-response dynamics from `initial`; writes the terminal profile and
 * the number of rounds.
 *
 * # Safety
 * Handles must be live; `out` and `rounds` writable (`rounds` may be null).
 */
enum EvgridStatus evgrid_dynamics(const struct EvgridScenario *s,
                                  const struct EvgridProfile *initial,
                                  double eps,
                                  size_t max_rounds,
                                  struct EvgridProfile **out,
                                  size_t *rounds);

/**
 * Total cost of vehicle `i`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum EvgridStatus evgrid_ev_cost(const struct EvgridScenario *s,
                                 const struct EvgridProfile *p,
                                 size_t i,
                                 double *out);

/**
 * # Safety
 * Handles must be live and `out` writable.
 */
enum EvgridStatus evgrid_potential(const struct EvgridScenario *s,
                                   const struct EvgridProfile *p,
                                   double *out);

/**
 * # Safety
 * Handles must be live and `out` writable.
 */
enum EvgridStatus evgrid_social_cost(const struct EvgridScenario *s,
                                     const struct EvgridProfile *p,
                                     double *out);

/**
 * Whether no vehicle can gain more than `tol` by deviating.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum EvgridStatus evgrid_is_nash(const struct EvgridScenario *s,
                                 const struct EvgridProfile *p,
                                 double tol,
                                 bool *out);

/**
 * Number of pure equilibria, by exhaustive enumeration within `budget`
 * assignments.
 *
 * # Safety
 * `s` must be live and `out` writable.
 */
enum EvgridStatus evgrid_equilibrium_count(const struct EvgridScenario *s,
                                           uint64_t budget,
                                           size_t *out);

/**
 * Exact price of anarchy and stability.
 *
 * # Safety
 * `s` must be live; `poa` and `pos` writable.
 */
enum EvgridStatus evgrid_efficiency(const struct EvgridScenario *s,
                                    uint64_t budget,
                                    double *poa,
                                    double *pos);

/**
 * Fleet size guaranteeing the efficiency bound with probability `1 - eps`
 * for `m` stations with the given ground-load means and variances.
 *
 * # Safety
 * `means` and `variances` must point to `m` values; `out` writable.
 */
enum EvgridStatus evgrid_hoeffding_fleet_size(const double *means,
                                              const double *variances,
                                              size_t m,
                                              double bound,
                                              double eps,
                                              uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVGRID_H */
