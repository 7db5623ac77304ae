#ifndef DUMBBELL_SPECTRA_H
#define DUMBBELL_SPECTRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DbStatus {
  DB_STATUS_OK = 0,
  DB_STATUS_NULL_POINTER = 1,
  DB_STATUS_INVALID_ARGUMENT = 2,
  DB_STATUS_INVALID_UTF8 = 3,
  DB_STATUS_CONFIG = 4,
  DB_STATUS_NUMERIC = 5,
  DB_STATUS_THEOREM_VIOLATION = 6,
  DB_STATUS_PANIC = 7,
} DbStatus;

typedef enum DbParity {
  DB_PARITY_UNKNOWN = 0,
  DB_PARITY_EVEN = 1,
  DB_PARITY_ODD = 2,
} DbParity;

typedef enum DbOrder {
  DB_ORDER_EVEN_BELOW_ODD = 0,
  DB_ORDER_ODD_BELOW_EVEN = 1,
} DbOrder;

/**
 * Parsed run configuration.
 */
typedef struct DbConfig DbConfig;

/**
 * Dumbbell mesh at the configuration's epsilon.
 */
typedef struct DbMesh DbMesh;

/**
 * Computed eigenpairs with parity labels, indices and nodal counts.
 */
typedef struct DbSpectrum DbSpectrum;

/**
 * Limiting data for the configured target mode.
 */
typedef struct DbPrediction {
  double mu;
  size_t index_in_bulk;
  size_t bulk_nodal_count;
  size_t k;
  size_t even_index;
  size_t odd_index;
  size_t even_count_bound;
  size_t odd_count_bound;
  enum DbOrder order;
  double theta_even;
  double theta_odd;
} DbPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *db_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *db_version(void);

/**
 * Parses a JSON run configuration.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DbStatus db_config_from_json(const char *json, struct DbConfig **out);

/**
 * The configuration of the worked examples (first example targeted).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DbStatus db_config_example(struct DbConfig **out);

/**
 * Sets the target to bulk mode `(j, n)`.
 *
 * # Safety
 * `cfg` must be a handle from this library.
 */
enum DbStatus db_config_set_target_mode(struct DbConfig *cfg, size_t j, size_t n);

/**
 * Sets `geometry.epsilon`.
 *
 * # Safety
 * `cfg` must be a handle from this library.
 */
enum DbStatus db_config_set_epsilon(struct DbConfig *cfg, double epsilon);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, freed at most once.
 */
void db_config_free(struct DbConfig *cfg);

/**
 * Meshes the dumbbell at the configured epsilon.
 *
 * # Safety
 * `cfg` must be a handle from this library and `out` a valid pointer.
 */
enum DbStatus db_mesh_generate(const struct DbConfig *cfg, struct DbMesh **out);

/**
 * # Safety
 * `mesh` must be a handle from this library.
 */
size_t db_mesh_vertex_count(const struct DbMesh *mesh);

/**
 * # Safety
 * `mesh` must be a handle from this library.
 */
size_t db_mesh_triangle_count(const struct DbMesh *mesh);

/**
 * Copies the vertex coordinates as interleaved `x, y` into `xy`, which
 * must hold `2 * db_mesh_vertex_count(mesh)` values.
 *
 * # Safety
 * `mesh` must be a handle from this library and `xy` writable for `len` values.
 */
enum DbStatus db_mesh_vertices(const struct DbMesh *mesh, double *xy, size_t len);

/**
 * # Safety
 * `mesh` must be null or a handle from this library, freed at most once.
 */
void db_mesh_free(struct DbMesh *mesh);

/**
 * Smallest `solver.k_eigs` eigenpairs on `mesh`, with parity labels and
 * nodal counts.
 *
 * # Safety
 * `cfg` and `mesh` must be handles from this library and `out` a valid pointer.
 */
enum DbStatus db_solve(const struct DbConfig *cfg,
                       const struct DbMesh *mesh,
                       struct DbSpectrum **out);

/**
 * # Safety
 * `s` must be a handle from this library.
 */
size_t db_spectrum_len(const struct DbSpectrum *s);

/**
 * Eigenvalue, parity, eigenvalue index and nodal count of pair `i`
 * (0-based). Any output pointer may be null.
 *
 * # Safety
 * `s` must be a handle from this library; non-null outputs must be writable.
 */
enum DbStatus db_spectrum_get(const struct DbSpectrum *s,
                              size_t i,
                              double *lambda,
                              enum DbParity *parity,
                              size_t *index,
                              size_t *nodal_count);

/**
 * # Safety
 * `s` must be null or a handle from this library, freed at most once.
 */
void db_spectrum_free(struct DbSpectrum *s);

/**
 * Limiting branch indices, nodal bounds and neck corrections for the
 * configured target.
 *
 * # Safety
 * `cfg` must be a handle from this library and `out` a valid pointer.
 */
enum DbStatus db_predict(const struct DbConfig *cfg, struct DbPrediction *out);

/**
 * Runs a CLI command (`"mesh"`, `"solve"`, `"sl"`, `"predict"`, `"sweep"`,
 * `"verify"` or `"nodal"`), writing its artifacts under `output.dir`.
 * `exit_code` receives the code the command-line tool would return.
 *
 * # Safety
 * `cfg` must be a handle from this library, `command` a NUL-terminated
 * string and `exit_code` null or writable.
 */
enum DbStatus db_run_command(const struct DbConfig *cfg, const char *command, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUMBBELL_SPECTRA_H */
