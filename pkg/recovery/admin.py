from django.contrib import admin

from .models import ExperimentRun, TrialResult


class TrialResultInline(admin.TabularInline):
    model = TrialResult
    extra = 0
    fields = ['trial_id', 'N', 'b', 'algorithm', 'final_rel_error', 'recovered', 'diverged']
    readonly_fields = fields


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['kind', 'setting', 'd1', 'd2', 'r', 'noise_sigma', 'trials', 'master_seed', 'created_at']
    list_filter = ['kind', 'setting', 'created_at']
    date_hierarchy = 'created_at'
    inlines = [TrialResultInline]


@admin.register(TrialResult)
class TrialResultAdmin(admin.ModelAdmin):
    list_display = ['run', 'trial_id', 'N', 'algorithm', 'final_rel_error', 'recovered', 'diverged', 'wall_time']
    list_filter = ['algorithm', 'recovered', 'diverged', 'run__kind']
    search_fields = ['run__setting']

    def get_queryset(self, request):
        return super().get_queryset(request).select_related('run')
