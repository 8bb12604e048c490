from django.apps import AppConfig

class ContactMechConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.contact_mech'
    verbose_name = 'Mecánica de contacto no holónoma'
