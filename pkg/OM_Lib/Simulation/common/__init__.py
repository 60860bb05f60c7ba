from .base_class import BaseSimulator
