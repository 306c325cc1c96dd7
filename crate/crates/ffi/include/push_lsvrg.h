/* C API for the push-lsvrg simulator.
 *
 * Conventions:
 *   - Handles (plu_network, plu_objective, plu_trace) are opaque pointers
 *     owned by the library; free them with the matching plu_*_free.
 *   - Fallible calls return plu_status; on failure the thread-local
 *     message from plu_last_error_message() describes what went wrong.
 *   - Handles are immutable after construction and safe to share across
 *     threads.
 */

#ifndef PUSH_LSVRG_H
#define PUSH_LSVRG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum plu_status {
  PLU_OK = 0,
  PLU_ERR_NULL_POINTER = 1,
  PLU_ERR_UTF8 = 2,
  PLU_ERR_INVALID_ARGUMENT = 3,
  PLU_ERR_NOT_STRONGLY_CONNECTED = 4,
  PLU_ERR_BUFFER_TOO_SMALL = 5,
  PLU_ERR_NOT_CONVERGED = 6,
  PLU_ERR_IO = 7,
  PLU_ERR_INTERNAL = 8
} plu_status;

typedef struct PluNetwork PluNetwork;
typedef struct PluObjective PluObjective;
typedef struct PluTrace PluTrace;

/* Certificate summary at one step size. */
typedef struct PluCertificate {
  double alpha;
  double rho;              /* spectral radius of the error-system matrix */
  double eta;              /* 1 - mu * alpha / 4 */
  double theorem_bound;    /* admissible step-size bound */
  double prop1_hypothesis; /* step hypothesis of the error-system derivation */
  double sigma_a;
  double delta;
  int32_t elementwise_ok;  /* some weight vector certifies H theta <= eta theta */
  int32_t admissible;      /* alpha lies inside the theorem's bound */
} PluCertificate;

/* Message for the most recent error on this thread; never NULL, valid
 * until the next failing call on the same thread. */
const char *plu_last_error_message(void);

/* --- networks ---------------------------------------------------------- */

/* kind: ring | mesh | directed_exponential | symmetric_exponential | full
 *       | random_strongly_connected | random_undirected | random_regular.
 * ratio is used by the random edge-sampling kinds, out_degree by
 * random_regular. */
plu_status plu_network_generate(const char *kind, uint64_t m, double ratio,
                                uint64_t out_degree, uint64_t seed,
                                PluNetwork **out);

/* Loads the documented edge-list format ("m" line, then "i j" per edge
 * j -> i). */
plu_status plu_network_read_edge_list(const char *path, PluNetwork **out);

void plu_network_free(PluNetwork *net);

uint64_t plu_network_agent_count(const PluNetwork *net);

/* Weighted-norm contraction factor sigma_a in [0, 1). */
plu_status plu_network_sigma_a(const PluNetwork *net, double *out);

/* Copies the Perron vector (length = agent count) into buf. */
plu_status plu_network_perron(const PluNetwork *net, double *buf, size_t len);

/* --- objectives -------------------------------------------------------- */

/* Synthetic diagonal quadratic with curvatures in [mu, lipschitz] and
 * targets scaled by spread; the residual reference is its closed-form
 * minimizer. */
plu_status plu_objective_quadratic(uint64_t m, uint64_t n,
                                   uint64_t q_per_agent, uint64_t seed,
                                   double mu, double lipschitz, double spread,
                                   PluObjective **out);

/* Ridge-regularized logistic regression over a sample file (sparse
 * "label index:value" text, or dense CSV with a "label" column). Labels
 * must be +1/-1. Samples are shuffled by seed and dealt evenly to m
 * agents. */
plu_status plu_objective_logistic_file(const char *path, uint64_t m,
                                       double beta, uint64_t seed,
                                       PluObjective **out);

void plu_objective_free(PluObjective *obj);

uint64_t plu_objective_dim(const PluObjective *obj);

/* --- runs -------------------------------------------------------------- */

/* algorithm: push_lsvrg_up | s_addopt | addopt | push_saga.
 * alpha <= 0 selects the admissible bound from the convergence theorem.
 * trigger_probs: probs_len == 1 broadcasts one probability to all agents;
 * probs_len == m gives per-agent values.
 * stop_residual <= 0 disables early stopping.
 * trace_csv_path may be NULL. */
plu_status plu_run(const PluNetwork *net, const PluObjective *obj,
                   const char *algorithm, double alpha,
                   const double *trigger_probs, size_t probs_len,
                   uint64_t seed, uint64_t max_iters, double stop_residual,
                   const char *trace_csv_path, PluTrace **out);

void plu_trace_free(PluTrace *trace);

/* Recorded rows: iterations + 1 for the initial state. */
uint64_t plu_trace_len(const PluTrace *trace);

plu_status plu_trace_final_residual(const PluTrace *trace, double *out);

/* Copies the residual column (plu_trace_len values) into buf. */
plu_status plu_trace_residuals(const PluTrace *trace, double *buf,
                               size_t len);

/* --- theory ------------------------------------------------------------ */

/* Fills the certificate summary at alpha (alpha <= 0 evaluates the
 * admissible bound itself). */
plu_status plu_theory_certificate(const PluNetwork *net,
                                  const PluObjective *obj,
                                  const double *trigger_probs,
                                  size_t probs_len, double alpha,
                                  PluCertificate *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PUSH_LSVRG_H */
