#pragma once

#include "doge/backend.hpp"
#include "doge/confidence.hpp"
#include "doge/config.hpp"
#include "doge/data.hpp"
#include "doge/decoding.hpp"
#include "doge/default_template.hpp"
#include "doge/errors.hpp"
#include "doge/kad.hpp"
#include "doge/logit_prior.hpp"
#include "doge/metrics.hpp"
#include "doge/prob_dist.hpp"
#include "doge/rng.hpp"
#include "doge/runner.hpp"
#include "doge/sampling.hpp"
#include "doge/serialization.hpp"
#include "doge/tokenizer.hpp"
#include "doge/toy_transformer.hpp"
#include "doge/trace_backend.hpp"
