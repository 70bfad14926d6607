#ifndef MANIFOLD_MODEL_IO_HPP
#define MANIFOLD_MODEL_IO_HPP

#include <nlohmann/json.hpp>
#include <string>

#include "manifold/mlp.hpp"
#include "manifold/noda.hpp"

namespace manifold {

// Network checkpointing: structure in the container's JSON header, parameters
// as named arrays "<prefix>/w<i>" and "<prefix>/b<i>".
nlohmann::json mlp_structure_json(const Mlp& net);
void noda_add_mlp(NodaFile& file, const std::string& prefix, const Mlp& net);
Mlp noda_read_mlp(const NodaFile& file, const std::string& prefix,
                  const nlohmann::json& structure);

}  // namespace manifold

#endif
