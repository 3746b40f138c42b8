#pragma once

#include "amc/chain.hpp"
#include "amc/csv.hpp"
#include "amc/decode.hpp"
#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/harness.hpp"
#include "amc/http_provider.hpp"
#include "amc/matrix.hpp"
#include "amc/monte_carlo.hpp"
#include "amc/ngram.hpp"
#include "amc/provider.hpp"
#include "amc/providers.hpp"
#include "amc/tokens.hpp"
#include "amc/transition.hpp"
