#pragma once

#include <sstream>
#include <string>

#include <json.hpp>

#include "sfd/evaluation.hpp"

namespace sfd {

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["accuracy"] = r.accuracy.value;
  j["accuracy_stderr"] = r.accuracy.stderr_;
  j["n_env"] = r.n_env;
  j["n_per_env"] = r.n_per_env;
  j["per_class"] = r.per_class;
  j["worst_case"] = r.worst_case;
  j["epsilon"] = r.epsilon_meta;
  if (r.groups) {
    nlohmann::ordered_json g;
    // Order: (m1,m2,ens) = FFF, FFT, FTF, FTT, TFF, TFT, TTF, TTT.
    g["counts"] = r.groups->counts.counts;
    g["n"] = r.groups->counts.n;
    g["fft"] = r.groups->counts.fft();
    g["ttf"] = r.groups->counts.ttf();
    g["fft_ratio"] = r.groups->fft_ratio;
    g["improve_contri_tt_ff"] = r.groups->improve_tt_ff;
    g["improve_contri_tf_ft"] = r.groups->improve_tf_ft;
    g["improve_contri_all"] = r.groups->improve_all;
    j["groups"] = g;
  }
  if (r.confidence) {
    nlohmann::ordered_json c;
    c["mean_confidence"] = r.confidence->mean_confidence;
    c["mean_margin"] = r.confidence->mean_margin;
    c["mean_confidence_correct"] = r.confidence->mean_confidence_correct;
    c["mean_confidence_incorrect"] = r.confidence->mean_confidence_incorrect;
    c["mean_margin_correct"] = r.confidence->mean_margin_correct;
    c["mean_margin_incorrect"] = r.confidence->mean_margin_incorrect;
    j["confidence"] = c;
  }
  return j;
}

/// Column order of the flat CSV row (header below is the documentation).
inline std::string eval_report_csv_header() {
  return "method,accuracy,accuracy_stderr,n_env,n_per_env,worst_case,epsilon,"
         "fft,ttf,fft_ratio,improve_contri_tt_ff,improve_contri_tf_ft,"
         "improve_contri_all,mean_confidence,mean_margin";
}

inline std::string to_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(12);
  os << r.method << ',' << r.accuracy.value << ',' << r.accuracy.stderr_ << ','
     << r.n_env << ',' << r.n_per_env << ',' << r.worst_case << ',' << r.epsilon_meta << ',';
  if (r.groups)
    os << r.groups->counts.fft() << ',' << r.groups->counts.ttf() << ','
       << r.groups->fft_ratio << ',' << r.groups->improve_tt_ff << ','
       << r.groups->improve_tf_ft << ',' << r.groups->improve_all << ',';
  else
    os << ",,,,,,";
  if (r.confidence)
    os << r.confidence->mean_confidence << ',' << r.confidence->mean_margin;
  else
    os << ',';
  return os.str();
}

}  // namespace sfd
