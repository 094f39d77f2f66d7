// Copyright 2026 The vecfl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vecfl/simulator.hpp"

namespace vecfl {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Writes the whole file to a sibling temp path and renames it into place, so
// readers never observe a partially written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string learning_curve_csv(const std::vector<EpisodeStats>& curve) {
  std::ostringstream os;
  os << "episode,mean_reward,mean_loss\n";
  for (const auto& e : curve) os << e.episode << ',' << fmt_num(e.mean_reward) << ',' << fmt_num(e.mean_loss) << '\n';
  return os.str();
}

inline std::string rounds_csv(const std::vector<RoundRow>& rows) {
  std::ostringstream os;
  os << "round,vehicle,q,T_comp,T_upload,T_fed,R_lambda,T_total,QE,F_global,F_best,converged\n";
  for (const auto& r : rows) {
    os << r.round << ',' << r.vehicle << ',' << r.q << ',' << fmt_num(r.T_comp) << ',' << fmt_num(r.T_upload) << ','
       << fmt_num(r.T_fed) << ',' << r.R_lambda << ',' << fmt_num(r.T_total) << ',' << fmt_num(r.QE) << ','
       << fmt_num(r.F_global) << ',' << fmt_num(r.F_best) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

inline constexpr const char* kSummaryHeader = "scheme,w1,K,avg_total_time,avg_QE,G_pi,rounds_to_converge,test_acc";

inline std::string summary_line(const SummaryRow& s) {
  std::ostringstream os;
  os << s.scheme << ',' << fmt_num(s.w1) << ',' << fmt_num(s.K) << ',' << fmt_num(s.avg_total_time) << ','
     << fmt_num(s.avg_QE) << ',' << fmt_num(s.G_pi) << ',' << fmt_num(s.rounds_to_converge) << ','
     << fmt_num(s.test_acc);
  return os.str();
}

inline void emit_metrics(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_atomic(dir / "learning_curve.csv", learning_curve_csv(res.learning_curve));
  write_atomic(dir / "rounds.csv", rounds_csv(res.rounds));
  write_atomic(dir / "summary.csv", std::string(kSummaryHeader) + "\n" + summary_line(res.summary) + "\n");
}

}  // namespace vecfl
