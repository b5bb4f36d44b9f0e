// Copyright 2026 The hierattn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hierattn/doc_model.hpp"

namespace hierattn::io {

// Newline-delimited documents, one nested array of non-negative integers per
// line: [[[t,...],...],...] (sections -> sentences -> tokens). Parse errors
// carry the 1-based line number.
std::vector<DocTree> read_documents(const std::string& path);

DocTree parse_document_line(const std::string& line);

// FNV-1a content hash of a file, for run manifests.
std::uint64_t fnv1a_file(const std::string& path);

std::string hex64(std::uint64_t value);

}  // namespace hierattn::io
