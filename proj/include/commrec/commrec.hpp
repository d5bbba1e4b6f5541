#pragma once

#include "commrec/cbf.hpp"
#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/eval.hpp"
#include "commrec/explain.hpp"
#include "commrec/features.hpp"
#include "commrec/hybrid.hpp"
#include "commrec/matrix.hpp"
#include "commrec/mf.hpp"
#include "commrec/random.hpp"
#include "commrec/similarity.hpp"
#include "commrec/splits.hpp"
#include "commrec/synth.hpp"
