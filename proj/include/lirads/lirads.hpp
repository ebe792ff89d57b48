#pragma once

#include "lirads/category.hpp"
#include "lirads/classifiers.hpp"
#include "lirads/embeddings.hpp"
#include "lirads/error.hpp"
#include "lirads/evaluation.hpp"
#include "lirads/hash.hpp"
#include "lirads/lexicon.hpp"
#include "lirads/matrix.hpp"
#include "lirads/measure_parser.hpp"
#include "lirads/pipeline.hpp"
#include "lirads/porter_stemmer.hpp"
#include "lirads/prediction.hpp"
#include "lirads/random.hpp"
#include "lirads/report.hpp"
#include "lirads/stopwords.hpp"
#include "lirads/synth.hpp"
#include "lirads/text_normalizer.hpp"
