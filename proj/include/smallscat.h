/* smallscat C API: opaque handles over the wave-scattering core.
 *
 * All functions returning int use the status codes below; functions returning
 * pointers yield NULL on failure. In both cases sscat_last_error() describes
 * the most recent failure on the calling thread.
 */
#ifndef SMALLSCAT_H
#define SMALLSCAT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SSCAT_OK 0
#define SSCAT_ERROR_INVALID 1   /* bad arguments, validation, parse errors */
#define SSCAT_ERROR_NUMERICAL 2 /* solver failures */
#define SSCAT_ERROR_IO 3        /* file access failures */

const char* sscat_version(void);
const char* sscat_last_error(void);

/* Worker threads for assembly loops; n <= 0 restores the hardware default. */
void sscat_set_threads(int n);

/* ---- surface meshes ---- */

typedef struct sscat_mesh sscat_mesh;

sscat_mesh* sscat_mesh_sphere(double radius, int refinement);
sscat_mesh* sscat_mesh_ellipsoid(const double semiaxes[3], int refinement);
sscat_mesh* sscat_mesh_load(const char* path);
int sscat_mesh_save(const sscat_mesh* mesh, const char* path);
void sscat_mesh_free(sscat_mesh* mesh);

int sscat_mesh_counts(const sscat_mesh* mesh, size_t* vertices,
                      size_t* triangles);
int sscat_mesh_area(const sscat_mesh* mesh, double* area);
int sscat_mesh_volume(const sscat_mesh* mesh, double* volume);
int sscat_mesh_radius(const sscat_mesh* mesh, double* radius);

#define SSCAT_KERNEL_NEWTON 0
#define SSCAT_KERNEL_NORMAL_DERIVATIVE 1

/* Integral over S x S of N_p(s) N_q(t) K(s,t); axes p, q in 0..2. */
int sscat_double_surface_integral(const sscat_mesh* mesh, int kernel, int p,
                                  int q, double* value);

/* ---- per-body scattering constants ---- */

typedef struct sscat_body sscat_body;

/* gamma in [-1, 1); order >= 1 terms of the polarizability series. */
sscat_body* sscat_body_analyze(const sscat_mesh* mesh, double gamma, int order);
void sscat_body_free(sscat_body* body);

int sscat_body_capacitance(const sscat_body* body, double* capacitance);
int sscat_body_volume(const sscat_body* body, double* volume);
int sscat_body_area(const sscat_body* body, double* area);
/* 3x3 tensors in row-major order. */
int sscat_body_b_tensor(const sscat_body* body, int m, double out[9]);
int sscat_body_alpha(const sscat_body* body, double out[9]);
int sscat_body_beta(const sscat_body* body, double out[9]);
int sscat_body_convergence(const sscat_body* body, double* ratio,
                           int* reliable);
int sscat_body_write_json(const sscat_body* body, const char* path);

/* ---- scenario runs (the CLI surface) ---- */

typedef struct sscat_scenario sscat_scenario;

sscat_scenario* sscat_scenario_load(const char* path);
void sscat_scenario_free(sscat_scenario* scenario);

int sscat_scenario_mode(const sscat_scenario* scenario, char* buffer,
                        size_t size);
/* 1 when the scenario declares a line or plane plot output, else 0. */
int sscat_scenario_has_plot_spec(const sscat_scenario* scenario);
int sscat_scenario_set_seed(sscat_scenario* scenario,
                            unsigned long long seed);
int sscat_scenario_set_output_dir(sscat_scenario* scenario, const char* dir);

/* Runs the pipeline, writes the declared artifacts and appends a human
 * readable summary to `summary` (may be NULL). */
int sscat_scenario_run(sscat_scenario* scenario, char* summary,
                       size_t summary_size);

#ifdef __cplusplus
}
#endif

#endif /* SMALLSCAT_H */
