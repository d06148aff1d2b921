#include "smallscat.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "smallscat/electrostatics.hpp"
#include "smallscat/parallel.hpp"
#include "smallscat/scenario.hpp"

using namespace smallscat;

struct sscat_mesh {
  SurfaceMesh mesh;
};

struct sscat_body {
  PolarizabilityResult result;
};

struct sscat_scenario {
  Scenario scenario;
};

namespace {

thread_local std::string g_last_error;

int status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::validation: return SSCAT_ERROR_INVALID;
    case ErrorKind::numerical: return SSCAT_ERROR_NUMERICAL;
    case ErrorKind::io: return SSCAT_ERROR_IO;
  }
  return SSCAT_ERROR_INVALID;
}

int record(const Error& e) {
  g_last_error = e.what();
  return status_of(e);
}

int record_unknown(const std::exception& e) {
  g_last_error = e.what();
  return SSCAT_ERROR_NUMERICAL;
}

int record_invalid(const char* msg) {
  g_last_error = msg;
  return SSCAT_ERROR_INVALID;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return SSCAT_OK;
  } catch (const Error& e) {
    return record(e);
  } catch (const std::exception& e) {
    return record_unknown(e);
  }
}

void copy_mat(const Mat3& m, double out[9]) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[3 * r + c] = m(r, c);
}

}  // namespace

extern "C" {

const char* sscat_version(void) { return "1.0.0"; }

const char* sscat_last_error(void) { return g_last_error.c_str(); }

void sscat_set_threads(int n) { set_thread_count(n); }

sscat_mesh* sscat_mesh_sphere(double radius, int refinement) {
  try {
    return new sscat_mesh{generate_sphere(radius, refinement)};
  } catch (const Error& e) {
    record(e);
    return nullptr;
  }
}

sscat_mesh* sscat_mesh_ellipsoid(const double semiaxes[3], int refinement) {
  if (!semiaxes) {
    record_invalid("semiaxes must not be NULL");
    return nullptr;
  }
  try {
    return new sscat_mesh{generate_ellipsoid(
        Vec3(semiaxes[0], semiaxes[1], semiaxes[2]), refinement)};
  } catch (const Error& e) {
    record(e);
    return nullptr;
  }
}

sscat_mesh* sscat_mesh_load(const char* path) {
  if (!path) {
    record_invalid("path must not be NULL");
    return nullptr;
  }
  try {
    return new sscat_mesh{load_mesh(path)};
  } catch (const Error& e) {
    record(e);
    return nullptr;
  }
}

int sscat_mesh_save(const sscat_mesh* mesh, const char* path) {
  if (!mesh || !path) return record_invalid("mesh and path must not be NULL");
  return guarded([&] { save_mesh(mesh->mesh, path); });
}

void sscat_mesh_free(sscat_mesh* mesh) { delete mesh; }

int sscat_mesh_counts(const sscat_mesh* mesh, size_t* vertices,
                      size_t* triangles) {
  if (!mesh) return record_invalid("mesh must not be NULL");
  if (vertices) *vertices = mesh->mesh.vertex_count();
  if (triangles) *triangles = mesh->mesh.triangle_count();
  return SSCAT_OK;
}

int sscat_mesh_area(const sscat_mesh* mesh, double* area) {
  if (!mesh || !area) return record_invalid("mesh and area must not be NULL");
  *area = mesh->mesh.total_area;
  return SSCAT_OK;
}

int sscat_mesh_volume(const sscat_mesh* mesh, double* volume) {
  if (!mesh || !volume)
    return record_invalid("mesh and volume must not be NULL");
  *volume = mesh->mesh.volume;
  return SSCAT_OK;
}

int sscat_mesh_radius(const sscat_mesh* mesh, double* radius) {
  if (!mesh || !radius)
    return record_invalid("mesh and radius must not be NULL");
  *radius = mesh->mesh.body_radius();
  return SSCAT_OK;
}

int sscat_double_surface_integral(const sscat_mesh* mesh, int kernel, int p,
                                  int q, double* value) {
  if (!mesh || !value)
    return record_invalid("mesh and value must not be NULL");
  if (kernel != SSCAT_KERNEL_NEWTON && kernel != SSCAT_KERNEL_NORMAL_DERIVATIVE)
    return record_invalid("unknown kernel kind");
  return guarded([&] {
    *value = double_surface_integral(mesh->mesh,
                                     kernel == SSCAT_KERNEL_NEWTON
                                         ? KernelKind::newton
                                         : KernelKind::normal_derivative,
                                     p, q);
  });
}

sscat_body* sscat_body_analyze(const sscat_mesh* mesh, double gamma,
                               int order) {
  if (!mesh) {
    record_invalid("mesh must not be NULL");
    return nullptr;
  }
  try {
    return new sscat_body{analyze_body(mesh->mesh, gamma, order)};
  } catch (const Error& e) {
    record(e);
    return nullptr;
  }
}

void sscat_body_free(sscat_body* body) { delete body; }

int sscat_body_capacitance(const sscat_body* body, double* capacitance) {
  if (!body || !capacitance)
    return record_invalid("body and capacitance must not be NULL");
  *capacitance = body->result.capacitance;
  return SSCAT_OK;
}

int sscat_body_volume(const sscat_body* body, double* volume) {
  if (!body || !volume)
    return record_invalid("body and volume must not be NULL");
  *volume = body->result.volume;
  return SSCAT_OK;
}

int sscat_body_area(const sscat_body* body, double* area) {
  if (!body || !area) return record_invalid("body and area must not be NULL");
  *area = body->result.area;
  return SSCAT_OK;
}

int sscat_body_b_tensor(const sscat_body* body, int m, double out[9]) {
  if (!body || !out) return record_invalid("body and out must not be NULL");
  if (m < 0 || m >= static_cast<int>(body->result.b_tensors.size()))
    return record_invalid("b tensor order out of range");
  copy_mat(body->result.b_tensors[static_cast<std::size_t>(m)], out);
  return SSCAT_OK;
}

int sscat_body_alpha(const sscat_body* body, double out[9]) {
  if (!body || !out) return record_invalid("body and out must not be NULL");
  copy_mat(body->result.alpha, out);
  return SSCAT_OK;
}

int sscat_body_beta(const sscat_body* body, double out[9]) {
  if (!body || !out) return record_invalid("body and out must not be NULL");
  copy_mat(body->result.beta, out);
  return SSCAT_OK;
}

int sscat_body_convergence(const sscat_body* body, double* ratio,
                           int* reliable) {
  if (!body) return record_invalid("body must not be NULL");
  if (ratio) *ratio = body->result.convergence_ratio;
  if (reliable) *reliable = body->result.convergence_reliable ? 1 : 0;
  return SSCAT_OK;
}

int sscat_body_write_json(const sscat_body* body, const char* path) {
  if (!body || !path) return record_invalid("body and path must not be NULL");
  return guarded([&] {
    std::ostringstream json;
    const PolarizabilityResult& r = body->result;
    auto mat = [](const Mat3& m) {
      std::ostringstream o;
      o << "[";
      for (int row = 0; row < 3; ++row) {
        o << "[" << format_g17(m(row, 0)) << ", " << format_g17(m(row, 1))
          << ", " << format_g17(m(row, 2)) << "]" << (row < 2 ? ", " : "");
      }
      o << "]";
      return o.str();
    };
    json << "{\n  \"capacitance\": " << format_g17(r.capacitance)
         << ",\n  \"volume\": " << format_g17(r.volume)
         << ",\n  \"area\": " << format_g17(r.area) << ",\n  \"b\": [";
    for (std::size_t i = 0; i < r.b_tensors.size(); ++i)
      json << mat(r.b_tensors[i]) << (i + 1 < r.b_tensors.size() ? ", " : "");
    json << "],\n  \"alpha\": " << mat(r.alpha)
         << ",\n  \"beta\": " << mat(r.beta)
         << ",\n  \"gamma\": " << format_g17(r.gamma)
         << ",\n  \"order\": " << r.order
         << ",\n  \"convergence_ratio\": " << format_g17(r.convergence_ratio)
         << "\n}\n";
    std::ofstream out(path);
    if (!out) throw Error::io(std::string(path) + ": cannot open for writing");
    out << json.str();
    if (!out) throw Error::io(std::string(path) + ": write failed");
  });
}

sscat_scenario* sscat_scenario_load(const char* path) {
  if (!path) {
    record_invalid("path must not be NULL");
    return nullptr;
  }
  try {
    return new sscat_scenario{load_scenario(path)};
  } catch (const Error& e) {
    record(e);
    return nullptr;
  }
}

void sscat_scenario_free(sscat_scenario* scenario) { delete scenario; }

int sscat_scenario_mode(const sscat_scenario* scenario, char* buffer,
                        size_t size) {
  if (!scenario || !buffer || size == 0)
    return record_invalid("scenario and buffer must not be NULL");
  std::snprintf(buffer, size, "%s", scenario->scenario.mode.c_str());
  return SSCAT_OK;
}

int sscat_scenario_has_plot_spec(const sscat_scenario* scenario) {
  if (!scenario) return 0;
  return scenario->scenario.line || scenario->scenario.plane ? 1 : 0;
}

int sscat_scenario_set_seed(sscat_scenario* scenario,
                            unsigned long long seed) {
  if (!scenario) return record_invalid("scenario must not be NULL");
  scenario->scenario.seed = seed;
  return SSCAT_OK;
}

int sscat_scenario_set_output_dir(sscat_scenario* scenario, const char* dir) {
  if (!scenario || !dir)
    return record_invalid("scenario and dir must not be NULL");
  scenario->scenario.out_dir = dir;
  return SSCAT_OK;
}

int sscat_scenario_run(sscat_scenario* scenario, char* summary,
                       size_t summary_size) {
  if (!scenario) return record_invalid("scenario must not be NULL");
  std::ostringstream log;
  const int status = guarded([&] { run_scenario(scenario->scenario, log); });
  if (summary && summary_size > 0)
    std::snprintf(summary, summary_size, "%s", log.str().c_str());
  return status;
}

}  // extern "C"
