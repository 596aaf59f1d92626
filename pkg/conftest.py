"""Configure Django before test collection (the tests use django.test.SimpleTestCase)."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'softdeep.settings')
django.setup()
