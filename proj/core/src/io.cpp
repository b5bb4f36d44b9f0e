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

#include "hierattn/io.hpp"

#include <fstream>

#include "hierattn/errors.hpp"
#include "json.hpp"

namespace hierattn::io {

DocTree parse_document_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("document parse error: ") + e.what());
  }
  if (!j.is_array()) throw DataError("document must be an array of sections");
  std::vector<std::vector<std::vector<std::int32_t>>> sections;
  for (const auto& sec : j) {
    if (!sec.is_array()) throw DataError("section must be an array of sentences");
    std::vector<std::vector<std::int32_t>> sentences;
    for (const auto& sent : sec) {
      if (!sent.is_array()) throw DataError("sentence must be an array of token ids");
      std::vector<std::int32_t> ids;
      for (const auto& tok : sent) {
        if (!tok.is_number_integer() || tok.get<std::int64_t>() < 0)
          throw DataError("token ids must be non-negative integers");
        ids.push_back(tok.get<std::int32_t>());
      }
      sentences.push_back(std::move(ids));
    }
    sections.push_back(std::move(sentences));
  }
  return build_tree(std::move(sections));
}

std::vector<DocTree> read_documents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_documents: cannot open " + path);
  std::vector<DocTree> docs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      docs.push_back(parse_document_line(line));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (docs.empty()) throw DataError("read_documents: no documents in " + path);
  return docs;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace hierattn::io
