#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "bicert/audit.hpp"
#include "bicert/certificate.hpp"
#include "bicert/solver.hpp"
#include "bicert/testbed.hpp"

namespace bicert {

// JSON has no literals for non-finite doubles; encode them as the strings
// "inf", "-inf", "nan" so reports stay parseable after a diverged run.
nlohmann::json num_or_inf(double x);

// Instance files: {"m", "n", "A", "B", "C", "Q", "d"} with matrices as
// row-major nested arrays.
void write_instance_json(const QuadraticInstance& inst, const std::string& path);
QuadraticInstance read_instance_json(const std::string& path);

// Trajectory CSV with the exact header
//   k,omega_err,v_err,approx_grad_norm,lower_grad_norm,upper_evals,lower_evals
// and floats printed as %.17g. Reading restores those columns only (the
// iterate vectors are not stored), which is enough to re-fit a rate.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

nlohmann::json certificate_to_json(const RateCertificate& cert);
nlohmann::json audit_to_json(const AuditReport& report);

// Writes JSON with a trailing newline; parent directory must exist.
void write_json_file(const nlohmann::json& j, const std::string& path);

} // namespace bicert
