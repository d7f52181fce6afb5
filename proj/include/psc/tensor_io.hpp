#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psc/tensor.hpp"

namespace psc {

// Named tensors in file order. Byte layout: docs/tensor_container.md.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(std::string_view bytes);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

// Lookup by name; throws DataError when absent.
const Tensor& find_tensor(const NamedTensors& tensors, std::string_view name);

}  // namespace psc
