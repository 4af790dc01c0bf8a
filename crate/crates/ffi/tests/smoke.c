#include <stdio.h>
#include <string.h>

#include "holotrans.h"

#define CHECK(expr)                                                      \
    do {                                                                 \
        HtStatus st_ = (expr);                                           \
        if (st_ != HT_STATUS_OK) {                                       \
            fprintf(stderr, "%s -> %d: %s\n", #expr, st_, ht_last_error()); \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(void) {
    HtConfig *cfg = NULL;
    if (ht_config_parse("model.q = 1", &cfg) != HT_STATUS_CONFIG_ERROR || cfg != NULL) {
        return 2;
    }
    CHECK(ht_config_parse("model.k = 2\nseed = 1\n", &cfg));
    HtRecord *rec = NULL;
    CHECK(ht_run(cfg, 2, &rec));
    CHECK(ht_record_verdict(rec));
    int32_t zeros = 0;
    CHECK(ht_record_zero_count(rec, &zeros));
    double grid = 0.0, cert = 0.0;
    CHECK(ht_record_margins(rec, 0, &grid, &cert));
    HtSection *s = NULL;
    CHECK(ht_record_section(rec, &s));
    double x[2] = {0.25, 0.5}, v[2] = {0.0, 0.0};
    CHECK(ht_section_evaluate(s, x, 2, v, 2));
    char *json = NULL;
    CHECK(ht_measure(s, cfg, &json));
    int has_strata = strstr(json, "\"strata\"") != NULL;
    ht_string_free(json);
    ht_section_free(s);
    ht_record_free(rec);
    ht_config_free(cfg);
    printf("zeros=%d eta_cert=%.6f\n", zeros, cert);
    return zeros == 2 && cert > 0.0 && has_strata ? 0 : 3;
}
