#pragma once

// Umbrella header. http_backend.hpp is excluded so offline users do not pay
// for the HTTP client; include it directly when the live backend is needed.

#include "tableqa/backend.hpp"
#include "tableqa/config.hpp"
#include "tableqa/errors.hpp"
#include "tableqa/eval.hpp"
#include "tableqa/ingest.hpp"
#include "tableqa/model.hpp"
#include "tableqa/oracle.hpp"
#include "tableqa/prompt.hpp"
#include "tableqa/synth.hpp"
