#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "phase_speckle.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        PsStatus s_ = (call);                                                \
        if (s_ != PS_STATUS_OK) {                                            \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,                \
                    ps_last_error_message());                                \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    PsPatternParams pp;
    CHECK(ps_pattern_params_default(&pp));
    PsRgbImage *pattern = NULL;
    CHECK(ps_pattern_generate(&pp, &pattern));

    PsRgbImage *left = NULL, *right = NULL;
    PsDisparity *gt = NULL;
    CHECK(ps_render_preset("flat", 160, 120, pattern, &left, &right, &gt));

    PsMatchParams mp;
    CHECK(ps_match_params_default(&mp));
    mp.d_max = 32;
    PsDisparity *disp = NULL;
    CHECK(ps_match_stereo(left, right, &mp, &disp));

    PsEvalSummary summary;
    CHECK(ps_evaluate(disp, gt, 3.0, false, &summary));

    if (ps_pattern_generate(NULL, &pattern) != PS_STATUS_NULL_POINTER || ps_last_error_message() == NULL) {
        fprintf(stderr, "null params not reported\n");
        return 1;
    }

    printf("version %s epe %.4f d1 %.4f n %llu depth %.1f\n", ps_version(), summary.epe, summary.d1,
           (unsigned long long)summary.n_evaluated, ps_depth(1200.0, 165.0, 100.0));
    int ok = summary.epe < 0.5 && fabs(ps_depth(1200.0, 165.0, 100.0) - 1980.0) < 1e-9;

    ps_disparity_free(disp);
    ps_disparity_free(gt);
    ps_rgb_image_free(left);
    ps_rgb_image_free(right);
    ps_rgb_image_free(pattern);
    return ok ? 0 : 1;
}
