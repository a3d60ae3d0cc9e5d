"""Seeding and process-pool helpers"""
