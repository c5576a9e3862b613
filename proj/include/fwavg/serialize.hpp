#pragma once

// JSON/CSV serialization of computed artifacts.  Shapes are stable and
// documented in the README; doubles round-trip exactly, so identical inputs
// serialize to identical bytes.

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fwavg/edge_coefficients.hpp"
#include "fwavg/gluing.hpp"
#include "fwavg/graph_diffusion.hpp"
#include "fwavg/sde.hpp"

namespace fwavg {

nlohmann::json coefficients_to_json(const CoefficientSet& coeffs);
nlohmann::json gluing_to_json(const std::vector<GluingData>& gluing);

// CSV with header "t,q1,q2,h,edge" (edge -1 when untracked or at a vertex).
std::string path_to_csv(const PathRecord& rec);
// CSV with header "t,h,edge" for limit-process paths.
std::string graph_path_to_csv(const GraphPathResult& rec);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fwavg
