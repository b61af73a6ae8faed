#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "npmd/embed_net.hpp"
#include "npmd/eval.hpp"
#include "npmd/inference.hpp"
#include "npmd/losses.hpp"
#include "npmd/representatives.hpp"
#include "npmd/synth_world.hpp"
#include "npmd/trainer.hpp"

namespace npmd {

// The unified configuration document: one section per subsystem, defaults
// matching the reference hyperparameters (alpha 0.5, beta 0.3, IoU bands,
// lr schedule, thresholds).
struct RunConfig {
    WorldConfig world;
    EmbedConfig embed;
    ProbConfig prob;
    LossConfig loss;
    TrainConfig train;
    InferenceConfig inference;
    EvalProtocol eval;

    void validate() const;
};

// Strict parser: unknown sections or keys are rejected, ranges validated.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

}  // namespace npmd
