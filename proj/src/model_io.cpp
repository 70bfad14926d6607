#include "manifold/model_io.hpp"

#include "manifold/errors.hpp"

namespace manifold {

nlohmann::json mlp_structure_json(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes;
  std::vector<std::string> acts;
  for (Activation a : net.activations) acts.push_back(activation_name(a));
  j["activations"] = acts;
  return j;
}

void noda_add_mlp(NodaFile& file, const std::string& prefix, const Mlp& net) {
  for (size_t i = 0; i < net.layer_count(); ++i) {
    file.add(prefix + "/w" + std::to_string(i), NodaArray::from_matrix(net.weights[i]));
    file.add(prefix + "/b" + std::to_string(i), NodaArray::from_vector(net.biases[i]));
  }
}

Mlp noda_read_mlp(const NodaFile& file, const std::string& prefix,
                  const nlohmann::json& structure) {
  Mlp net;
  try {
    net.layer_sizes = structure.at("layer_sizes").get<std::vector<int>>();
    for (const auto& name : structure.at("activations").get<std::vector<std::string>>())
      net.activations.push_back(activation_from_name(name));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::Corruption,
                  "checkpoint: bad network structure: " + std::string(e.what()));
  }
  for (size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
    net.weights.push_back(file.get(prefix + "/w" + std::to_string(i)).as_matrix());
    net.biases.push_back(file.get(prefix + "/b" + std::to_string(i)).as_vector());
  }
  net.validate();
  return net;
}

}  // namespace manifold
