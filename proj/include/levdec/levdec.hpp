#pragma once

// Umbrella header for the edit-based iterative-refinement decoding library.

#include "levdec/bleu.hpp"
#include "levdec/corpus.hpp"
#include "levdec/diagnostics.hpp"
#include "levdec/edit.hpp"
#include "levdec/engine.hpp"
#include "levdec/errors.hpp"
#include "levdec/experiment.hpp"
#include "levdec/length_predictor.hpp"
#include "levdec/linear_policy.hpp"
#include "levdec/oracle_policy.hpp"
#include "levdec/policy.hpp"
#include "levdec/report_io.hpp"
#include "levdec/rng.hpp"
#include "levdec/rollin.hpp"
#include "levdec/sentence.hpp"
#include "levdec/vocab.hpp"
