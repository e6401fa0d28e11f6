from django.apps import AppConfig


class GroundstatesConfig(AppConfig):
    label = "groundstates"
    name = "bpgs.groundstates"
